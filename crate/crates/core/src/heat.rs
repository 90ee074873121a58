//! Dirichlet heat semigroup `M u̇ = -S u` by Crank-Nicolson, with survival
//! probabilities, heat kernel columns and the intrinsic ultracontractivity
//! diagnostics built on them.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::capwidth::{cap_width_with, CapWidthOptions, CapWidthResult};
use crate::elliptic::{green, DEFAULT_TOL};
use crate::elliptic::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{default_max_iter, pcg, Mic};
use crate::mesh::{sublevel_domain, DomainSystem};
use crate::spectrum::SpectralResult;

/// Relative residual of each implicit solve.
pub const STEP_TOL: f64 = 1e-10;
/// Implicit Euler half-steps replacing the first two Crank-Nicolson steps,
/// which damps the undamped high modes of rough initial data.
const STARTUP_HALF_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
}

/// States of one heat evolution at the requested times.
#[derive(Debug, Clone)]
pub struct HeatRun<'a> {
    pub system: &'a DomainSystem,
    pub times: Vec<f64>,
    pub states: Vec<ScalarField<'a>>,
    pub scheme: Scheme,
    /// Nominal step; each interval between output times uses the largest
    /// step not exceeding it that lands exactly on the interval end.
    pub dt: f64,
}

impl HeatRun<'_> {
    /// `π(t)`: maximum over nodes of each state.
    pub fn sup_norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.max().max(0.0)).collect()
    }

    /// `∫ u(t) dμ` per time.
    pub fn mass_integrals(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.values().iter().zip(self.system.mass()).map(|(u, m)| u * m).sum())
            .collect()
    }
}

/// Default step `min(h, t_min / 100)`.
pub fn default_dt(sys: &DomainSystem, t_min: f64) -> f64 {
    sys.h().min(t_min / 100.0)
}

fn check_times(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Domain("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(times.iter().copied().filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min))
}

fn resolve_dt(sys: &DomainSystem, times: &[f64], dt: Option<f64>) -> Result<f64> {
    let t_min = check_times(times)?;
    if t_min.is_infinite() {
        // Only t = 0 requested.
        return Ok(dt.unwrap_or(sys.h()));
    }
    let dt = dt.unwrap_or_else(|| default_dt(sys, t_min));
    if !(dt > 0.0) || dt > t_min / 10.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("dt = {dt} must be positive and at most min(t)/10 = {}", t_min / 10.0)));
    }
    Ok(dt)
}

/// `(M + c S) x = b` with `c = step / 2`.
struct ImplicitOperator<'s> {
    sys: &'s DomainSystem,
    c: f64,
    mic: Mic<'s>,
    weights: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'s> ImplicitOperator<'s> {
    fn new(sys: &'s DomainSystem, step: f64) -> Self {
        let c = 0.5 * step;
        let diag: Vec<f64> = sys.mass().iter().map(|m| m + 4.0 * c).collect();
        ImplicitOperator {
            sys,
            c,
            mic: Mic::new(sys.stencil(), &diag, c),
            weights: sys.mass().iter().map(|m| 1.0 / m).collect(),
            scratch: vec![0.0; sys.len()],
        }
    }

    fn solve(&self, rhs: &[f64], x: &mut [f64]) -> Result<()> {
        let st = self.sys.stencil();
        let (c, mass) = (self.c, self.sys.mass());
        let apply = |u: &[f64], o: &mut [f64]| {
            st.apply(u, o);
            for ((oi, ui), m) in o.iter_mut().zip(u).zip(mass) {
                *oi = m * ui + c * *oi;
            }
        };
        let pre = |r: &[f64], z: &mut [f64]| self.mic.apply(r, z);
        pcg(apply, Some(&pre), Some(&self.weights), rhs, x, STEP_TOL, default_max_iter(rhs.len()))?;
        Ok(())
    }

    /// Crank-Nicolson step `u ← (M + cS)⁻¹ (M - cS) u`.
    fn cn_step(&mut self, u: &mut [f64]) -> Result<()> {
        self.sys.apply_stiffness(u, &mut self.scratch);
        let rhs: Vec<f64> =
            u.iter().zip(self.sys.mass()).zip(&self.scratch).map(|((ui, m), su)| m * ui - self.c * su).collect();
        self.solve(&rhs, u)
    }

    /// Implicit Euler step of length `c`: `u ← (M + cS)⁻¹ M u`.
    fn euler_half_step(&mut self, u: &mut [f64]) -> Result<()> {
        let rhs: Vec<f64> = u.iter().zip(self.sys.mass()).map(|(ui, m)| m * ui).collect();
        self.solve(&rhs, u)
    }
}

/// Evolves `u0` and records the state at each time. When `integral` is given
/// it accumulates `∫₀^{t_last} u dt` with the quadrature matching each step,
/// so that `S · integral = M (u0 - u(t_last))` holds up to solver tolerance.
fn evolve_into(
    sys: &DomainSystem,
    u0: &[f64],
    times: &[f64],
    dt: f64,
    mut integral: Option<&mut Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let mut u = u0.to_vec();
    let mut now = 0.0;
    let mut started = false;
    let mut out = Vec::with_capacity(times.len());
    let mut prev = vec![0.0; u.len()];
    for &target in times {
        let span = target - now;
        if span > 0.0 {
            let n = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let step = span / n as f64;
            let mut op = ImplicitOperator::new(sys, step);
            let mut done = 0;
            if !started {
                let halves = STARTUP_HALF_STEPS.min(2 * n);
                for _ in 0..halves {
                    op.euler_half_step(&mut u)?;
                    if let Some(acc) = integral.as_deref_mut() {
                        acc.iter_mut().zip(&u).for_each(|(a, x)| *a += 0.5 * step * x);
                    }
                }
                done = halves / 2;
                started = true;
            }
            for _ in done..n {
                if integral.is_some() {
                    prev.copy_from_slice(&u);
                }
                op.cn_step(&mut u)?;
                if let Some(acc) = integral.as_deref_mut() {
                    for ((a, x), p) in acc.iter_mut().zip(&u).zip(&prev) {
                        *a += 0.5 * step * (x + p);
                    }
                }
            }
            now = target;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Evolves arbitrary initial data.
pub fn evolve<'a>(sys: &'a DomainSystem, u0: &ScalarField<'_>, times: &[f64], dt: Option<f64>) -> Result<HeatRun<'a>> {
    if u0.values().len() != sys.len() {
        return Err(Error::DegenerateInput("initial data lives on another system".into()));
    }
    if sys.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let dt = resolve_dt(sys, times, dt)?;
    let states = evolve_into(sys, u0.values(), times, dt, None)?;
    Ok(HeatRun {
        system: sys,
        times: times.to_vec(),
        states: states.into_iter().map(|v| ScalarField::from_raw(sys, v)).collect(),
        scheme: Scheme::CrankNicolson,
        dt,
    })
}

/// `P_D(t, ·)`, the evolution of the constant 1.
pub fn survival<'a>(sys: &'a DomainSystem, t_grid: &[f64], dt: Option<f64>) -> Result<HeatRun<'a>> {
    if sys.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let one = ScalarField::from_raw(sys, vec![1.0; sys.len()]);
    evolve(sys, &one, t_grid, dt)
}

fn delta<'a>(sys: &'a DomainSystem, x: Point) -> Result<(usize, ScalarField<'a>)> {
    sys.surface().check(x)?;
    let i = sys.snap_interior(x).ok_or(Error::InvalidStart { u: x.u, v: x.v })?;
    let mut v = vec![0.0; sys.len()];
    v[i] = 1.0 / sys.mass()[i];
    Ok((i, ScalarField::from_raw(sys, v)))
}

/// Heat kernel columns `p_D(t, x, ·)` from the discrete delta `e_x / mass(x)`.
pub fn heat_kernel_columns<'a>(sys: &'a DomainSystem, times: &[f64], x: Point, dt: Option<f64>) -> Result<HeatRun<'a>> {
    let (_, d) = delta(sys, x)?;
    evolve(sys, &d, times, dt)
}

/// `p_D(t, x, ·)`.
pub fn heat_kernel_column<'a>(sys: &'a DomainSystem, t: f64, x: Point, dt: Option<f64>) -> Result<ScalarField<'a>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let run = heat_kernel_columns(sys, &[t], x, dt)?;
    Ok(run.states.into_iter().next().expect("one state per time"))
}

/// `∫₀^T p_D(s, x, ·) ds` and the final column `p_D(T, x, ·)`.
pub fn integrated_kernel<'a>(
    sys: &'a DomainSystem,
    x: Point,
    t_end: f64,
    dt: Option<f64>,
) -> Result<(ScalarField<'a>, ScalarField<'a>)> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    let (_, d) = delta(sys, x)?;
    let dt = resolve_dt(sys, &[t_end], dt)?;
    let mut acc = vec![0.0; sys.len()];
    let last = evolve_into(sys, d.values(), &[t_end], dt, Some(&mut acc))?.pop().expect("one state");
    Ok((ScalarField::from_raw(sys, acc), ScalarField::from_raw(sys, last)))
}

/// One inequality evaluated at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constant: f64,
    pub checks: Vec<BoundCheck>,
    pub pass: bool,
}

impl BoundReport {
    fn new(constant: f64, checks: Vec<BoundCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        BoundReport { constant, checks, pass }
    }

    /// Smallest `bound - measured` (upper) or `measured - bound` (lower) gap.
    pub fn worst_margin(&self, upper: bool) -> f64 {
        self.checks
            .iter()
            .map(|c| if upper { c.bound - c.measured } else { c.measured - c.bound })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `e^{-λt} ≤ π_D(t)`, relaxed by the factor `1 - slack`.
pub fn survival_lower_bound_check(run: &HeatRun<'_>, lambda: f64, slack: f64) -> BoundReport {
    let checks = run
        .times
        .iter()
        .zip(run.sup_norms())
        .map(|(&t, pi)| {
            let bound = (-lambda * t).exp();
            BoundCheck { t, measured: pi, bound, pass: pi >= (1.0 - slack) * bound }
        })
        .collect();
    BoundReport::new(slack, checks)
}

/// `π_D(t) ≤ C/(C-1) · exp(-t / (C ‖v_D‖∞))`.
pub fn survival_upper_bound_check(run: &HeatRun<'_>, torsion_sup: f64, c: f64) -> Result<BoundReport> {
    if !(c > 1.0) {
        return Err(Error::Domain(format!("constant must exceed 1, got {c}")));
    }
    if !(torsion_sup > 0.0) {
        return Err(Error::Domain("torsion supremum must be positive".into()));
    }
    let checks = run
        .times
        .iter()
        .zip(run.sup_norms())
        .map(|(&t, pi)| {
            let bound = c / (c - 1.0) * (-t / (c * torsion_sup)).exp();
            BoundCheck { t, measured: pi, bound, pass: pi <= bound }
        })
        .collect();
    Ok(BoundReport::new(c, checks))
}

/// Least-squares slope of `ln y` against `x`, ignoring nonpositive `y`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &v)| (a, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Decay of `π_D` in the width-scaled time `t / w²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthDecay {
    pub applicable: bool,
    pub width: f64,
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    /// `-d ln π / d(t/w²)`.
    pub c2: f64,
    /// `-d ln π / dt = c2 / w²`.
    pub rate: f64,
    pub pass: bool,
}

/// Fits `ln π_D(t)` against `t / w²` at `t = s · w²` for `s` in `scaled_times`.
/// Inapplicable (and passing) when the width is not below 1.
pub fn capwidth_survival_check(
    sys: &DomainSystem,
    width: &CapWidthResult,
    scaled_times: &[f64],
    dt: Option<f64>,
) -> Result<WidthDecay> {
    let w = width.w;
    if !(w.is_finite() && w > 0.0 && w < 1.0) {
        return Ok(WidthDecay {
            applicable: false,
            width: w,
            times: Vec::new(),
            sup_norms: Vec::new(),
            c2: f64::NAN,
            rate: f64::NAN,
            pass: true,
        });
    }
    let times: Vec<f64> = scaled_times.iter().map(|s| s * w * w).collect();
    let run = survival(sys, &times, dt)?;
    let pis = run.sup_norms();
    let scaled: Vec<f64> = times.iter().map(|t| t / (w * w)).collect();
    let c2 = -log_slope(&scaled, &pis).ok_or_else(|| Error::DegenerateInput("too few positive samples".into()))?;
    Ok(WidthDecay { applicable: true, width: w, times, sup_norms: pis, c2, rate: c2 / (w * w), pass: c2 > 0.0 })
}

/// Empirical constants of `c_t φ(x)φ(y) ≤ p_D(t,x,y) ≤ C_t φ(x)φ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IuRatio {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    /// `upper / lower`.
    pub spread: f64,
    pub evaluated: usize,
    /// Pairs where `φ` fell below `1e-30`.
    pub skipped: usize,
}

const PHI_FLOOR: f64 = 1e-30;

/// Ratios `p_D(t,x,y) / (φ(x)φ(y))` over sample pairs. Slightly negative
/// kernel values from the scheme are floored at 0.
pub fn iu_ratio(sys: &DomainSystem, eig: &SpectralResult<'_>, t: f64, pairs: &[(Point, Point)], dt: Option<f64>) -> Result<IuRatio> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let phi = eig.phi.values();
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut skipped = 0;
    for &(x, y) in pairs {
        let i = sys.snap_interior(x).ok_or(Error::InvalidStart { u: x.u, v: x.v })?;
        let j = sys.snap_interior(y).ok_or(Error::InvalidStart { u: y.u, v: y.v })?;
        if phi[i] < PHI_FLOOR || phi[j] < PHI_FLOOR {
            skipped += 1;
            continue;
        }
        by_source.entry(i).or_default().push(j);
    }
    let (mut lower, mut upper, mut evaluated) = (f64::INFINITY, 0.0f64, 0);
    for (i, targets) in by_source {
        let col = heat_kernel_column(sys, t, sys.point(i), dt)?;
        for j in targets {
            let q = col.values()[j].max(0.0) / (phi[i] * phi[j]);
            lower = lower.min(q);
            upper = upper.max(q);
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::DegenerateInput("no usable sample pairs".into()));
    }
    Ok(IuRatio { t, lower, upper, spread: upper / lower, evaluated, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IuTerm {
    pub t: f64,
    pub width: f64,
    pub contribution: f64,
    pub empty: bool,
    /// The sublevel was under four cells across; its width was set to `h`.
    pub resolution_exhausted: bool,
}

/// Dyadic evaluation of `∫₀^τ w_η({G_D(·,o) < t})² dt/t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IuIntegral {
    pub tau: f64,
    pub value: f64,
    pub partials: Vec<f64>,
    pub terms: Vec<IuTerm>,
    /// Last increment over the total.
    pub final_increment: f64,
    /// Final increment below 5% of the total.
    pub cauchy: bool,
}

/// Largest lattice-step distance from an interior node to the complement.
fn max_graph_depth(sys: &DomainSystem) -> usize {
    let mut depth = vec![usize::MAX; sys.len()];
    let mut queue = VecDeque::new();
    for i in 0..sys.len() {
        if sys.neighbors(i).count() < 4 {
            depth[i] = 1;
            queue.push_back(i);
        }
    }
    let mut best = 0;
    while let Some(i) = queue.pop_front() {
        best = best.max(depth[i]);
        let next: Vec<usize> = sys.neighbors(i).filter(|&j| depth[j] == usize::MAX).collect();
        for j in next {
            depth[j] = depth[i] + 1;
            queue.push_back(j);
        }
    }
    best
}

/// Samples the sublevel widths at `t_j = τ 2^{-j}`, `j < n_samples`, each
/// weighted by `ln 2`. `tau` defaults to half the maximum of `G_D(·, o)`.
pub fn iu_integral(
    sys: &DomainSystem,
    o: Point,
    tau: Option<f64>,
    n_samples: usize,
    eta: f64,
    rmax: f64,
    opts: &CapWidthOptions,
) -> Result<IuIntegral> {
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let g = green(sys, o, DEFAULT_TOL)?;
    let gmax = g.max();
    let tau = tau.unwrap_or(0.5 * gmax);
    if !(tau > 0.0 && tau <= gmax) {
        return Err(Error::Domain(format!("tau = {tau} must lie in (0, max G = {gmax}]")));
    }
    let mut terms = Vec::with_capacity(n_samples);
    let mut partials = Vec::with_capacity(n_samples);
    let mut total = 0.0;
    let mut cap = rmax;
    for j in 0..n_samples {
        let t = tau * 0.5f64.powi(j as i32);
        let sub = sublevel_domain(sys, &g, t);
        let (width, empty, exhausted) = if sub.is_empty() {
            (0.0, true, false)
        } else if max_graph_depth(&sub) < 2 {
            (sys.h(), false, true)
        } else {
            // Sublevels shrink with t, so the previous width bounds this one.
            let mut w = cap_width_with(&sub, eta, cap, opts)?;
            if !w.is_finite() && cap < rmax {
                w = cap_width_with(&sub, eta, rmax, opts)?;
            }
            (w.w, false, false)
        };
        if width.is_finite() && width > 0.0 {
            cap = (width + sys.h()).min(rmax);
        }
        let contribution = width * width * std::f64::consts::LN_2;
        total += contribution;
        partials.push(total);
        terms.push(IuTerm { t, width, contribution, empty, resolution_exhausted: exhausted });
    }
    let last = terms.last().map_or(0.0, |t| t.contribution);
    let final_increment = if total > 0.0 { last / total } else { 0.0 };
    Ok(IuIntegral { tau, value: total, partials, terms, final_increment, cauchy: final_increment < 0.05 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{green, torsion};
    use crate::geometry::ModelSurface;
    use crate::mesh::{build_system, DomainSpec, Window};
    use crate::spectrum::principal_eigenpair;

    fn disk(h: f64) -> DomainSystem {
        build_system(
            ModelSurface::euclidean(),
            Window::centered(1.3, h).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn survival_starts_at_one_and_loses_mass() {
        let sys = disk(0.05);
        let run = survival(&sys, &[0.0, 0.05, 0.1, 0.2], None).unwrap();
        assert!(run.states[0].values().iter().all(|&v| v == 1.0));
        let m = run.mass_integrals();
        assert!(m.windows(2).all(|w| w[1] < w[0]));
        assert!(run.states.iter().all(|s| s.min() > -1e-12));
    }

    #[test]
    fn time_grid_validation() {
        let sys = disk(0.1);
        assert!(survival(&sys, &[0.2, 0.1], None).is_err());
        assert!(survival(&sys, &[0.1], Some(0.05)).is_err());
        assert!(survival(&sys, &[], None).is_err());
    }

    #[test]
    fn disk_decay_rate_matches_eigenvalue() {
        let sys = disk(0.04);
        let eig = principal_eigenpair(&sys, 1e-8).unwrap();
        let run = survival(&sys, &[1.0, 2.0], None).unwrap();
        let p0: Vec<f64> = run.states.iter().map(|s| s.sample(Point::ORIGIN)).collect();
        let slope = (p0[1] / p0[0]).ln();
        assert!((slope + eig.lambda).abs() < 0.01 * eig.lambda, "{slope} vs {}", eig.lambda);
    }

    #[test]
    fn integrated_kernel_is_green() {
        let sys = disk(0.05);
        let x = Point::new(0.2, 0.1);
        let (int, last) = integrated_kernel(&sys, x, 1.0, Some(0.01)).unwrap();
        let g = green(&sys, x, 1e-12).unwrap();
        // S ∫p = M(p(0) - p(T)) exactly for the scheme.
        let i = sys.snap_interior(x).unwrap();
        let mut e = vec![0.0; sys.len()];
        e[i] = 1.0;
        let tail: Vec<f64> = last.values().iter().zip(sys.mass()).map(|(p, m)| p * m).collect();
        let mut s_int = vec![0.0; sys.len()];
        sys.apply_stiffness(int.values(), &mut s_int);
        for k in 0..sys.len() {
            assert!((s_int[k] - (e[k] - tail[k])).abs() < 1e-7, "{k}");
        }
        let far = sys.snap_interior(Point::new(-0.5, 0.0)).unwrap();
        assert!((int.values()[far] / g.values()[far] - 1.0).abs() < 0.01);
    }

    #[test]
    fn upper_and_lower_bounds_on_disk() {
        let sys = disk(0.04);
        let eig = principal_eigenpair(&sys, 1e-8).unwrap();
        let v = torsion(&sys, 1e-10).unwrap();
        let run = survival(&sys, &[0.25, 0.5, 1.0], None).unwrap();
        assert!(survival_lower_bound_check(&run, eig.lambda, 0.0).pass);
        let up = survival_upper_bound_check(&run, v.sup, 2.0).unwrap();
        assert!(up.pass, "{up:?}");
        assert!(survival_upper_bound_check(&run, v.sup, 1.0).is_err());
    }

    #[test]
    fn log_slope_of_exponential() {
        let x = [0.0f64, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * (-1.5 * t).exp()).collect();
        assert!((log_slope(&x, &y).unwrap() + 1.5).abs() < 1e-12);
        assert!(log_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn single_sample_integral_is_one_term() {
        let sys = build_system(
            ModelSurface::euclidean(),
            Window::centered(3.2, 0.1).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap();
        let opts = CapWidthOptions { max_centers: 100, ..Default::default() };
        let r = iu_integral(&sys, Point::ORIGIN, None, 1, 0.5, 1.0, &opts).unwrap();
        assert!(r.terms[0].width > 0.0 && r.terms[0].width.is_finite(), "{r:?}");
        assert_eq!(r.partials.len(), 1);
        let w = r.terms[0].width;
        assert!((r.value - w * w * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn ratio_spread_is_finite_on_disk() {
        let sys = disk(0.1);
        let eig = principal_eigenpair(&sys, 1e-8).unwrap();
        let pairs = [
            (Point::new(0.0, 0.0), Point::new(0.5, 0.0)),
            (Point::new(0.3, 0.3), Point::new(-0.6, 0.2)),
        ];
        let r = iu_ratio(&sys, &eig, 0.5, &pairs, None).unwrap();
        assert_eq!(r.evaluated, 2);
        assert!(r.spread >= 1.0 && r.spread.is_finite());
    }
}
