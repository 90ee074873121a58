use std::cell::RefCell;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use iuws_core::capwidth::{cap_width_with, CapWidthOptions};
use iuws_core::elliptic::{self, ScalarField};
use iuws_core::heat::{self, survival_lower_bound_check, survival_upper_bound_check};
use iuws_core::montecarlo::{mc_survival_curve, WalkConfig};
use iuws_core::spectrum::{principal_eigenpair, tail_width_probe};
use iuws_core::verify::{Suite, VerifyOptions};
use iuws_core::{DomainSystem, Point, RunConfig, SurfaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::{unix_now, RunReport};
use crate::{CliError, CliResult, Common, EXIT_OK, EXIT_VERIFY_FAILED};

pub(crate) type Op = fn(&Ctx) -> CliResult<Value>;

/// Slack on the survival lower bound `e^{-λt} ≤ π(t)`.
const LOWER_SLACK: f64 = 0.02;
/// Constant in `π(t) ≤ C/(C-1) e^{-t/(C‖v‖)}`.
const UPPER_CONSTANT: f64 = 2.0;
/// Sample pairs for the heat-kernel/eigenfunction ratio.
const IU_PAIRS: usize = 200;
const DEFAULT_SURVIVAL_TIMES: [f64; 4] = [0.1, 0.25, 0.5, 1.0];
const DEFAULT_KERNEL_TIMES: [f64; 1] = [0.1];
const DEFAULT_MC_TIMES: [f64; 2] = [0.1, 0.5];
const DEFAULT_IU_TIME: f64 = 0.5;

/// State shared by one subcommand run. `norm` is the run on the
/// unit-curvature model; results are converted back through `cfg`.
pub(crate) struct Ctx<'a> {
    cfg: &'a RunConfig,
    norm: RunConfig,
    sys: DomainSystem,
    stem: String,
    files: RefCell<Vec<PathBuf>>,
}

impl Ctx<'_> {
    fn l(&self) -> f64 {
        self.cfg.length_scale
    }

    /// Chart coordinates carry the length scale only in the plane.
    fn chart_scale(&self) -> f64 {
        match self.cfg.surface {
            SurfaceKind::Euclidean => self.l(),
            SurfaceKind::Hyperbolic => 1.0,
        }
    }

    fn physical(&self, p: Point) -> Value {
        let c = self.chart_scale();
        json!({ "u": p.u * c, "v": p.v * c })
    }

    fn length(&self, x: f64) -> Value {
        finite(x * self.l())
    }

    fn time(&self, t: f64) -> f64 {
        t * self.l() * self.l()
    }

    fn tol(&self) -> f64 {
        self.norm.tolerances.solver
    }

    fn rmax(&self) -> CliResult<f64> {
        Ok(self.cfg.rmax_or_default()?)
    }

    fn width_options(&self) -> CapWidthOptions {
        CapWidthOptions {
            max_centers: self.norm.max_centers,
            bisect_tol: self.norm.tolerances.bisect,
            solver_tol: self.tol(),
            ..Default::default()
        }
    }

    /// Configured pole, or the interior node farthest from the boundary.
    fn pole(&self) -> Point {
        self.norm.pole.unwrap_or_else(|| {
            let depth = self.sys.depth();
            let i = (0..depth.len()).max_by(|&a, &b| depth[a].total_cmp(&depth[b])).unwrap_or(0);
            self.sys.point(i)
        })
    }

    /// Configured start point, falling back to the pole.
    fn point(&self) -> Point {
        self.norm.point.unwrap_or_else(|| self.pole())
    }

    /// Times in model units, defaulting to `fallback` (physical units).
    fn times(&self, fallback: &[f64]) -> Vec<f64> {
        if self.norm.times.is_empty() {
            fallback.iter().map(|t| t / (self.l() * self.l())).collect()
        } else {
            self.norm.times.clone()
        }
    }

    /// Writes `(x, y, value)` rows in physical units.
    fn field(&self, tag: &str, f: &ScalarField<'_>, value_scale: f64) -> CliResult<()> {
        let path = self.cfg.output.join(format!("{}.{tag}.csv", self.stem));
        let c = self.chart_scale();
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "x,y,value")?;
        for (i, v) in f.values().iter().enumerate() {
            let p = f.system().point(i);
            writeln!(out, "{},{},{}", p.u * c, p.v * c, v * value_scale)?;
        }
        out.flush()?;
        self.files.borrow_mut().push(path);
        Ok(())
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

pub(crate) fn execute(name: &str, cfg: &RunConfig, timestamps: bool, op: Op) -> CliResult<RunReport> {
    let start = Instant::now();
    let norm = cfg.normalized()?;
    let sys = cfg.build()?;
    std::fs::create_dir_all(&cfg.output)?;
    let ctx = Ctx { cfg, norm, sys, stem: format!("{}.{name}", cfg.name), files: RefCell::default() };
    let results = op(&ctx)?;
    let mut report = RunReport {
        command: name.into(),
        config: cfg.clone(),
        results,
        files: ctx.files.take(),
        generated_unix: timestamps.then(unix_now),
        runtime_s: timestamps.then(|| start.elapsed().as_secs_f64()),
    };
    let path = cfg.output.join(format!("{}.json", ctx.stem));
    report.files.sort();
    std::fs::write(&path, report.to_json()?)?;
    Ok(report)
}

pub(crate) fn torsion(ctx: &Ctx) -> CliResult<Value> {
    let v = elliptic::torsion(&ctx.sys, ctx.tol())?;
    let l2 = ctx.l() * ctx.l();
    let argmax = v.field.argmax().map(|i| ctx.physical(ctx.sys.point(i)));
    ctx.field("torsion", &v.field, l2)?;
    Ok(json!({ "sup": v.sup * l2, "argmax": argmax, "nodes": ctx.sys.len() }))
}

pub(crate) fn eigen(ctx: &Ctx) -> CliResult<Value> {
    let eig = principal_eigenpair(&ctx.sys, ctx.norm.tolerances.eigen)?;
    let l = ctx.l();
    let mut out = json!({
        "lambda": eig.lambda / (l * l),
        "residual": eig.residual,
        "iterations": eig.iterations,
        "disconnected": eig.disconnected,
        "nodes": ctx.sys.len(),
    });
    // Unit L²(μ) norm in physical units.
    ctx.field("eigenfunction", &eig.phi, 1.0 / l)?;
    if !ctx.norm.radii.is_empty() {
        let tails = tail_width_probe(
            &ctx.sys,
            ctx.pole(),
            &ctx.norm.radii,
            ctx.norm.eta,
            ctx.rmax()?,
            &ctx.width_options(),
        )?;
        out["tail_widths"] = tails
            .iter()
            .map(|t| json!({ "radius": t.radius * l, "width": ctx.length(t.width.w) }))
            .collect();
    }
    Ok(out)
}

pub(crate) fn green(ctx: &Ctx) -> CliResult<Value> {
    let pole = ctx.pole();
    let g = elliptic::green(&ctx.sys, pole, ctx.tol())?;
    let mut out = json!({ "pole": ctx.physical(pole), "max": g.max() });
    if let Some(p) = ctx.norm.point {
        out["probe"] = json!({ "point": ctx.physical(p), "value": g.sample(p) });
    }
    ctx.field("green", &g, 1.0)?;
    Ok(out)
}

pub(crate) fn capwidth(ctx: &Ctx) -> CliResult<Value> {
    let rmax = ctx.rmax()?;
    let w = cap_width_with(&ctx.sys, ctx.norm.eta, rmax, &ctx.width_options())?;
    Ok(json!({
        "eta": w.eta,
        "w": ctx.length(w.w),
        "rmax": ctx.length(rmax),
        "radius_bracket": [ctx.length(w.radius_bracket.0), ctx.length(w.radius_bracket.1)],
        "tested_centers": w.tested_centers,
        "worst_center": w.worst_center.map(|p| ctx.physical(p)),
        "search": w.search,
        "monotonicity_fallback": w.monotonicity_fallback,
    }))
}

pub(crate) fn survival(ctx: &Ctx) -> CliResult<Value> {
    let times = ctx.times(&DEFAULT_SURVIVAL_TIMES);
    let run = heat::survival(&ctx.sys, &times, None)?;
    let v = elliptic::torsion(&ctx.sys, ctx.tol())?;
    let eig = principal_eigenpair(&ctx.sys, ctx.norm.tolerances.eigen)?;
    let lower = survival_lower_bound_check(&run, eig.lambda, LOWER_SLACK);
    let upper = survival_upper_bound_check(&run, v.sup, UPPER_CONSTANT)?;
    let point = ctx.norm.point;
    let sup = run.sup_norms();
    let rows: Vec<Value> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            json!({
                "t": ctx.time(t),
                "sup": sup[k],
                "at_point": point.map(|p| run.states[k].sample(p)),
                "lower_bound": lower.checks[k].bound,
                "upper_bound": upper.checks[k].bound,
            })
        })
        .collect();
    for (k, state) in run.states.iter().enumerate() {
        ctx.field(&format!("t{k}"), state, 1.0)?;
    }
    let l2 = ctx.l() * ctx.l();
    Ok(json!({
        "lambda": eig.lambda / l2,
        "torsion_sup": v.sup * l2,
        "point": point.map(|p| ctx.physical(p)),
        "dt": ctx.time(run.dt),
        "survival": rows,
        "lower_bound_holds": lower.pass,
        "lower_bound_slack": LOWER_SLACK,
        "upper_bound_holds": upper.pass,
        "upper_bound_constant": UPPER_CONSTANT,
    }))
}

pub(crate) fn heat_kernel(ctx: &Ctx) -> CliResult<Value> {
    let times = ctx.times(&DEFAULT_KERNEL_TIMES);
    let x = ctx.point();
    let run = heat::heat_kernel_columns(&ctx.sys, &times, x, None)?;
    let l2 = ctx.l() * ctx.l();
    let mass = run.mass_integrals();
    let rows: Vec<Value> = times
        .iter()
        .zip(&run.states)
        .zip(&mass)
        .map(|((&t, s), m)| json!({ "t": ctx.time(t), "max": s.max() / l2, "mass": m }))
        .collect();
    for (k, state) in run.states.iter().enumerate() {
        ctx.field(&format!("t{k}"), state, 1.0 / l2)?;
    }
    Ok(json!({ "point": ctx.physical(x), "dt": ctx.time(run.dt), "columns": rows }))
}

pub(crate) fn iu_check(ctx: &Ctx) -> CliResult<Value> {
    let o = ctx.pole();
    let rmax = ctx.rmax()?;
    let integral = heat::iu_integral(&ctx.sys, o, ctx.norm.tau, ctx.norm.samples, ctx.norm.eta, rmax, &ctx.width_options())?;
    let t = ctx.norm.times.first().copied().unwrap_or(DEFAULT_IU_TIME / (ctx.l() * ctx.l()));
    let eig = principal_eigenpair(&ctx.sys, ctx.norm.tolerances.eigen)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.norm.seed);
    let n = ctx.sys.len();
    let pairs: Vec<(Point, Point)> = (0..IU_PAIRS)
        .map(|_| (ctx.sys.point(rng.random_range(0..n)), ctx.sys.point(rng.random_range(0..n))))
        .collect();
    let ratio = heat::iu_ratio(&ctx.sys, &eig, t, &pairs, None)?;
    let l2 = ctx.l() * ctx.l();
    let terms: Vec<Value> = integral
        .terms
        .iter()
        .map(|s| {
            json!({
                "level": s.t,
                "width": ctx.length(s.width),
                "contribution": s.contribution * l2,
                "empty": s.empty,
                "resolution_exhausted": s.resolution_exhausted,
            })
        })
        .collect();
    Ok(json!({
        "pole": ctx.physical(o),
        "integral": {
            "tau": integral.tau,
            "value": integral.value * l2,
            "partials": integral.partials.iter().map(|p| p * l2).collect::<Vec<_>>(),
            "terms": terms,
            "final_increment": integral.final_increment,
            "cauchy": integral.cauchy,
        },
        "ratio": {
            "t": ctx.time(ratio.t),
            "lower": ratio.lower,
            "upper": ratio.upper,
            "spread": ratio.spread,
            "evaluated": ratio.evaluated,
            "skipped": ratio.skipped,
        },
    }))
}

pub(crate) fn mc(ctx: &Ctx) -> CliResult<Value> {
    let times = ctx.times(&DEFAULT_MC_TIMES);
    let requested = ctx.point();
    // Start the walk on a grid node so that walk and PDE share one lattice.
    let i = ctx
        .sys
        .snap_interior(requested)
        .ok_or(iuws_core::Error::InvalidStart { u: requested.u, v: requested.v })?;
    let x = ctx.sys.point(i);
    let walk = WalkConfig {
        step: ctx.norm.h,
        paths: ctx.norm.paths,
        seed: ctx.norm.seed,
        max_time: times.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE),
    };
    let est = mc_survival_curve(ctx.sys.surface(), &ctx.norm.domain, x, &times, &walk)?;
    let pde = heat::survival(&ctx.sys, &times, None)?;
    let rows: Vec<Value> = est
        .iter()
        .zip(&pde.states)
        .map(|(e, s)| {
            let p = s.values()[i];
            let n = walk.paths as f64;
            // Add-one smoothing keeps the error positive at 0 and 1.
            let q = (e.estimate * n + 1.0) / (n + 2.0);
            let se = (q * (1.0 - q) / n).sqrt();
            json!({
                "t": ctx.time(e.t),
                "estimate": e.estimate,
                "stderr": e.stderr,
                "pde": p,
                "z": (e.estimate - p) / se,
            })
        })
        .collect();
    Ok(json!({ "point": ctx.physical(x), "paths": walk.paths, "seed": walk.seed, "survival": rows }))
}

pub(crate) fn verify(corpus: &str, only: &[String], common: &Common) -> CliResult<i32> {
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        corpus: corpus.into(),
        h: common.h.unwrap_or(defaults.h),
        seed: common.seed.unwrap_or(defaults.seed),
        timestamps: !common.no_timestamp,
        only: only.to_vec(),
        ..defaults
    };
    if !(opts.h > 0.0 && opts.h.is_finite()) {
        return Err(CliError::Usage(format!("--h must be positive, got {}", opts.h)));
    }
    iuws_core::corpus(corpus)?;
    let report = Suite::new(opts).run_with(|c| {
        let status = if c.skipped.is_some() { "SKIP" } else if c.pass { "PASS" } else { "FAIL" };
        eprintln!("[{status}] {} ({}): {}", c.id, c.anchor, c.detail);
    });
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("verify.{corpus}.json"));
    std::fs::write(&path, report.to_json()?)?;
    let failures: Vec<_> = report.failures().collect();
    println!("{} checks, {} failing; report written to {}", report.checks.len(), failures.len(), path.display());
    for c in &failures {
        println!("failed: {} ({})", c.id, c.anchor);
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
