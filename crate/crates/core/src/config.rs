//! Run configurations and the shipped standard corpus.
//!
//! Lengths in a config are physical. With `length_scale = L` the surface has
//! curvature `-1/L²` (hyperbolic) and every length is divided by `L` before the
//! solvers see it; [`Scale`] maps results back.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elliptic::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::geometry::{ModelSurface, Point, SurfaceKind};
use crate::mesh::{build_system, DomainSpec, DomainSystem, Window};
use crate::spectrum::DEFAULT_EIGEN_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub umin: f64,
    pub umax: f64,
    pub vmin: f64,
    pub vmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver: f64,
    pub eigen: f64,
    /// Radius resolution of width searches; `None` means one grid cell.
    pub bisect: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { solver: DEFAULT_TOL, eigen: DEFAULT_EIGEN_TOL, bisect: None }
    }
}

fn default_eta() -> f64 {
    0.5
}
fn default_seed() -> u64 {
    42
}
fn default_scale() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_paths() -> usize {
    100_000
}
fn default_samples() -> usize {
    16
}
fn default_max_centers() -> usize {
    2000
}

/// One domain plus the knobs every subcommand may need. Omitted fields take
/// their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub surface: SurfaceKind,
    #[serde(default = "default_scale")]
    pub length_scale: f64,
    pub window: WindowConfig,
    pub h: f64,
    pub domain: DomainSpec,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Largest radius tried by width searches; defaults to a quarter of the
    /// window's shorter side (Euclidean) or 4 (hyperbolic).
    #[serde(default)]
    pub rmax: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Green pole / base point; defaults to the deepest interior node.
    #[serde(default)]
    pub pole: Option<Point>,
    /// Start point for kernels and walks; defaults to `pole`.
    #[serde(default)]
    pub point: Option<Point>,
    /// Output times for heat runs.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Tail radii for the essential-spectrum probe.
    #[serde(default)]
    pub radii: Vec<f64>,
    /// Upper end of the integral criterion; defaults to half the maximum of `G`.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_max_centers")]
    pub max_centers: usize,
}

/// Converts unit-model results back to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale(pub f64);

impl Scale {
    pub fn length(self, x: f64) -> f64 {
        x * self.0
    }
    pub fn time(self, t: f64) -> f64 {
        t * self.0 * self.0
    }
    /// Eigenvalues scale like inverse time.
    pub fn eigenvalue(self, l: f64) -> f64 {
        l / (self.0 * self.0)
    }
    /// Torsion has units of time.
    pub fn torsion(self, v: f64) -> f64 {
        self.time(v)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        // Mask paths are relative to the config file.
        if let DomainSpec::MaskFile { path: p } = &mut cfg.domain {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return bad(format!("length_scale must be positive, got {}", self.length_scale));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if let Some(r) = self.rmax {
            if !(r > 0.0) {
                return bad(format!("rmax must be positive, got {r}"));
            }
        }
        let t = &self.tolerances;
        if !(t.solver > 0.0 && t.eigen > 0.0 && t.bisect.is_none_or(|b| b > 0.0)) {
            return bad("tolerances must be positive".into());
        }
        if self.times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return bad("times must be finite and nonnegative".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        self.domain.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.normalized().map(|_| ())
    }

    pub fn surface(&self) -> ModelSurface {
        ModelSurface::new(self.surface)
    }

    pub fn scale(&self) -> Scale {
        Scale(self.length_scale)
    }

    /// The same run expressed on the unit-curvature model (`length_scale = 1`).
    pub fn normalized(&self) -> Result<RunConfig> {
        let l = self.length_scale;
        if l == 1.0 {
            return Ok(self.clone());
        }
        let hyper = self.surface == SurfaceKind::Hyperbolic;
        // Chart coordinates are lengths only in the plane.
        let chart = |x: f64| if hyper { x } else { x / l };
        let pt = |p: Point| Point::new(chart(p.u), chart(p.v));
        let mut out = self.clone();
        out.length_scale = 1.0;
        out.window = WindowConfig {
            umin: chart(self.window.umin),
            umax: chart(self.window.umax),
            vmin: chart(self.window.vmin),
            vmax: chart(self.window.vmax),
        };
        out.h = chart(self.h);
        out.domain = scale_spec(&self.domain, l, hyper)?;
        out.rmax = self.rmax.map(|r| r / l);
        out.tolerances.bisect = self.tolerances.bisect.map(|b| b / l);
        out.pole = self.pole.map(pt);
        out.point = self.point.map(pt);
        out.times = self.times.iter().map(|t| t / (l * l)).collect();
        out.radii = self.radii.iter().map(|r| r / l).collect();
        Ok(out)
    }

    /// Copy with a different grid spacing (physical units).
    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    /// Window of the normalized run.
    pub fn window(&self) -> Result<Window> {
        let n = self.normalized()?;
        let w = n.window;
        Window::new(w.umin, w.umax, w.vmin, w.vmax, n.h)
    }

    /// Discretizes the normalized domain.
    pub fn build(&self) -> Result<DomainSystem> {
        let n = self.normalized()?;
        build_system(n.surface(), self.window()?, &n.domain)
    }

    /// Default `rmax` in normalized units.
    pub fn rmax_or_default(&self) -> Result<f64> {
        let n = self.normalized()?;
        Ok(n.rmax.unwrap_or(match self.surface {
            SurfaceKind::Euclidean => {
                0.25 * (n.window.umax - n.window.umin).min(n.window.vmax - n.window.vmin)
            }
            SurfaceKind::Hyperbolic => 4.0,
        }))
    }
}

fn scale_spec(spec: &DomainSpec, l: f64, hyper: bool) -> Result<DomainSpec> {
    let chart = |x: f64| if hyper { x } else { x / l };
    let pt = |p: Point| Point::new(chart(p.u), chart(p.v));
    Ok(match spec {
        DomainSpec::GeodesicBall { center, radius } => DomainSpec::GeodesicBall { center: pt(*center), radius: radius / l },
        DomainSpec::Annulus { center, inner, outer } => {
            DomainSpec::Annulus { center: pt(*center), inner: inner / l, outer: outer / l }
        }
        DomainSpec::Rectangle { center, width, height } => {
            DomainSpec::Rectangle { center: pt(*center), width: chart(*width), height: chart(*height) }
        }
        DomainSpec::JohnComb { center, side, gap0, beta, teeth, tooth_width, tooth_height } => DomainSpec::JohnComb {
            center: pt(*center),
            side: chart(*side),
            gap0: chart(*gap0),
            beta: *beta,
            teeth: *teeth,
            tooth_width: chart(*tooth_width),
            tooth_height: chart(*tooth_height),
        },
        DomainSpec::Cusp { center, exponent, length } => {
            if !hyper && *exponent != 1.0 {
                // `v < u^p` is not closed under dilation for p != 1.
                return Err(Error::Config("a planar cusp cannot be rescaled; use length_scale = 1".into()));
            }
            DomainSpec::Cusp { center: pt(*center), exponent: *exponent, length: chart(*length) }
        }
        // The 2-D Green function is scale invariant, so levels carry over.
        DomainSpec::Sublevel { base, pole, level } => {
            DomainSpec::Sublevel { base: Box::new(scale_spec(base, l, hyper)?), pole: pt(*pole), level: *level }
        }
        DomainSpec::MaskFile { path } => DomainSpec::MaskFile { path: path.clone() },
    })
}

/// The named fixture set shared by the verification suite and the acceptance
/// tests.
pub const STANDARD_CORPUS: [(&str, &str); 12] = [
    ("disk", include_str!("../corpus/disk.json")),
    ("rectangle", include_str!("../corpus/rectangle.json")),
    ("annulus", include_str!("../corpus/annulus.json")),
    ("strip_a0.1", include_str!("../corpus/strip_a0.1.json")),
    ("strip_a0.2", include_str!("../corpus/strip_a0.2.json")),
    ("john_comb", include_str!("../corpus/john_comb.json")),
    ("cusp", include_str!("../corpus/cusp.json")),
    ("hyperbolic_ball_r0.5", include_str!("../corpus/hyperbolic_ball_r0.5.json")),
    ("hyperbolic_ball_r1", include_str!("../corpus/hyperbolic_ball_r1.json")),
    ("hyperbolic_ball_r2", include_str!("../corpus/hyperbolic_ball_r2.json")),
    ("hyperbolic_ball_r4", include_str!("../corpus/hyperbolic_ball_r4.json")),
    ("hyperbolic_ball_r8", include_str!("../corpus/hyperbolic_ball_r8.json")),
];

/// Loads a named corpus. Only `standard` exists.
pub fn corpus(name: &str) -> Result<Vec<RunConfig>> {
    if name != "standard" {
        return Err(Error::Config(format!("unknown corpus `{name}` (available: standard)")));
    }
    STANDARD_CORPUS.iter().map(|(_, text)| RunConfig::from_json(text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_parses_and_builds() {
        let all = corpus("standard").unwrap();
        assert_eq!(all.len(), STANDARD_CORPUS.len());
        for (cfg, (name, _)) in all.iter().zip(STANDARD_CORPUS) {
            assert_eq!(cfg.name, name);
            let sys = cfg.clone().with_h(0.05).build().unwrap();
            assert!(!sys.is_empty(), "{name}");
        }
        assert!(corpus("other").is_err());
    }

    #[test]
    fn defaults_and_unknown_keys() {
        let text = r#"{"surface":"euclidean","window":{"umin":-1,"umax":1,"vmin":-1,"vmax":1},"h":0.1,
            "domain":{"kind":"geodesic_ball","center":{"u":0,"v":0},"radius":0.5}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.eta, 0.5);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.tolerances, Tolerances::default());
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again, cfg);
        let extra = text.replacen("\"h\"", "\"colour\":1,\"h\"", 1);
        assert!(RunConfig::from_json(&extra).is_err());
        let bad_eta = text.replacen("\"h\"", "\"eta\":1.5,\"h\"", 1);
        assert!(matches!(RunConfig::from_json(&bad_eta), Err(Error::Config(_))));
    }

    #[test]
    fn length_scale_rescales_inputs() {
        let mut cfg = corpus("standard").unwrap().remove(0);
        cfg.length_scale = 2.0;
        cfg.times = vec![4.0];
        let n = cfg.normalized().unwrap();
        assert_eq!(n.length_scale, 1.0);
        assert_eq!(n.h, cfg.h / 2.0);
        assert_eq!(n.times, vec![1.0]);
        let s = cfg.scale();
        assert_eq!(s.eigenvalue(4.0), 1.0);
        assert_eq!(s.torsion(1.0), 4.0);
    }
}
