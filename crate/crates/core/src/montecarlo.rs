//! Survival probabilities from time-changed random walks in the chart.
//!
//! The walk lives on the lattice `step·ℤ²` through the start point. At a node
//! `z` it waits an exponential time with rate `4 / (step² w(z))` and then moves
//! to one of the four neighbours, so its generator is the 5-point
//! Laplace-Beltrami operator `w(z)⁻¹ Δ_h` with mean elapsed time
//! `step² w(z) / 4` per step. It is killed on the first node outside `D`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelSurface, Point};
use crate::mesh::DomainSpec;

pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
    pub max_time: f64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("walk step must be positive, got {}", self.step)));
        }
        if self.paths < MIN_PATHS {
            return Err(Error::Config(format!("need at least {MIN_PATHS} paths, got {}", self.paths)));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(Error::Config(format!("max_time must be positive, got {}", self.max_time)));
        }
        Ok(())
    }
}

/// Survival estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Membership and jump rates on a dense patch of the walk lattice.
struct WalkLattice {
    k0: i64,
    l0: i64,
    nk: i64,
    nl: i64,
    /// Total jump rate per node; 0 marks a killing node.
    rate: Vec<f64>,
    start: (i64, i64),
}

impl WalkLattice {
    fn build(surface: &ModelSurface, spec: &DomainSpec, x: Point, step: f64) -> Result<Self> {
        if matches!(spec, DomainSpec::Sublevel { .. } | DomainSpec::MaskFile { .. }) {
            return Err(Error::Config(format!("random walks need an analytic domain, got {}", spec.kind_name())));
        }
        spec.validate()?;
        surface.check(x)?;
        if spec.contains(surface, x) != Some(true) {
            return Err(Error::InvalidStart { u: x.u, v: x.v });
        }
        let (umin, umax, vmin, vmax) = spec
            .chart_bbox(surface)?
            .ok_or_else(|| Error::Config("domain has no bounding box".into()))?;
        // Use the global lattice when x sits on it, so nodes coincide exactly
        // with those of a PDE grid of the same spacing.
        let (su, sv) = (x.u / step, x.v / step);
        let aligned = (su - su.round()).abs() < 1e-9 && (sv - sv.round()).abs() < 1e-9;
        let point = |k: i64, l: i64| {
            if aligned {
                Point::new(k as f64 * step, l as f64 * step)
            } else {
                Point::new(x.u + k as f64 * step, x.v + l as f64 * step)
            }
        };
        let (ou, ov) = if aligned { (0.0, 0.0) } else { (x.u, x.v) };
        let k0 = ((umin - ou) / step).floor() as i64 - 1;
        let k1 = ((umax - ou) / step).ceil() as i64 + 1;
        let l0 = ((vmin - ov) / step).floor() as i64 - 1;
        let l1 = ((vmax - ov) / step).ceil() as i64 + 1;
        let (nk, nl) = (k1 - k0 + 1, l1 - l0 + 1);
        let mut rate = vec![0.0; (nk * nl) as usize];
        for l in l0..=l1 {
            for k in k0..=k1 {
                let p = point(k, l);
                if spec.contains(surface, p) == Some(true) {
                    rate[((l - l0) * nk + (k - k0)) as usize] = 4.0 / (step * step * surface.weight_unchecked(p));
                }
            }
        }
        let start = if aligned { (su.round() as i64, sv.round() as i64) } else { (0, 0) };
        Ok(WalkLattice { k0, l0, nk, nl, rate, start })
    }

    fn rate(&self, (k, l): (i64, i64)) -> f64 {
        let (dk, dl) = (k - self.k0, l - self.l0);
        if dk < 0 || dl < 0 || dk >= self.nk || dl >= self.nl {
            return 0.0;
        }
        self.rate[(dl * self.nk + dk) as usize]
    }

    /// Time of death, or `horizon` if the path is still alive then.
    fn lifetime(&self, rng: &mut ChaCha8Rng, horizon: f64) -> f64 {
        let mut z = self.start;
        let mut t = 0.0;
        loop {
            let q = self.rate(z);
            if q == 0.0 {
                return t;
            }
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / q;
            if t > horizon {
                return horizon;
            }
            z = match rng.random_range(0..4u8) {
                0 => (z.0 + 1, z.1),
                1 => (z.0 - 1, z.1),
                2 => (z.0, z.1 + 1),
                _ => (z.0, z.1 - 1),
            };
        }
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Survival fractions at each time, from one common set of paths.
pub fn mc_survival_curve(
    surface: &ModelSurface,
    spec: &DomainSpec,
    x: Point,
    times: &[f64],
    cfg: &WalkConfig,
) -> Result<Vec<SurvivalEstimate>> {
    cfg.validate()?;
    if times.iter().any(|&t| !(t >= 0.0 && t <= cfg.max_time)) {
        return Err(Error::Domain(format!("times must lie in [0, max_time = {}]", cfg.max_time)));
    }
    let lattice = WalkLattice::build(surface, spec, x, cfg.step)?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let deaths: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| lattice.lifetime(&mut path_rng(cfg.seed, i), horizon))
        .collect();
    let n = cfg.paths as f64;
    Ok(times
        .iter()
        .map(|&t| {
            let alive = if t == 0.0 { cfg.paths } else { deaths.iter().filter(|&&d| d >= t).count() };
            let p = alive as f64 / n;
            SurvivalEstimate { t, estimate: p, stderr: (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}

/// `P_D(t, x)` estimated by the fraction of surviving walks.
pub fn mc_survival(surface: &ModelSurface, spec: &DomainSpec, x: Point, t: f64, cfg: &WalkConfig) -> Result<(f64, f64)> {
    let e = mc_survival_curve(surface, spec, x, &[t], cfg)?[0];
    Ok((e.estimate, e.stderr))
}
