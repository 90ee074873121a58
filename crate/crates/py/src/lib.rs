//! Python bindings.
//!
//! Everything here works on the unit-curvature model: a [`Config`] is
//! normalized by its `length_scale` before it is discretized, and results are
//! returned in those units. Points are `(u, v)` chart tuples.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use iuws_core::capwidth::{cap_width_with, capacity_ratio, CapWidthOptions};
use iuws_core::elliptic::{self, ScalarField};
use iuws_core::heat;
use iuws_core::mesh::domain_measure;
use iuws_core::montecarlo::{mc_survival_curve, WalkConfig};
use iuws_core::spectrum::principal_eigenpair;
use iuws_core::verify::{Suite, VerifyOptions};
use iuws_core::{DomainSystem, ModelSurface, Point, RunConfig, SurfaceKind};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

create_exception!(iuws, SolverError, PyRuntimeError, "A numerical solver failed to converge.");

fn err(e: iuws_core::Error) -> PyErr {
    if e.is_solver_failure() {
        SolverError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn pt((u, v): (f64, f64)) -> Point {
    Point::new(u, v)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// The Euclidean plane or the Poincaré disk.
#[pyclass(frozen, skip_from_py_object, module = "iuws")]
#[derive(Clone, Copy)]
struct Surface(ModelSurface);

#[pymethods]
impl Surface {
    /// `kind` is `"euclidean"` or `"hyperbolic"`.
    #[new]
    fn new(kind: &str) -> PyResult<Self> {
        match kind {
            "euclidean" => Ok(Surface(ModelSurface::euclidean())),
            "hyperbolic" => Ok(Surface(ModelSurface::hyperbolic())),
            _ => Err(PyValueError::new_err(format!("unknown surface {kind:?}"))),
        }
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.0.kind() {
            SurfaceKind::Euclidean => "euclidean",
            SurfaceKind::Hyperbolic => "hyperbolic",
        }
    }

    fn dist(&self, p: (f64, f64), q: (f64, f64)) -> PyResult<f64> {
        self.0.dist(pt(p), pt(q)).map_err(err)
    }

    fn conformal_weight(&self, p: (f64, f64)) -> PyResult<f64> {
        self.0.conformal_weight(pt(p)).map_err(err)
    }

    fn ball_volume(&self, r: f64) -> PyResult<f64> {
        self.0.ball_volume(r).map_err(err)
    }

    /// Image of `p` under the disk automorphism taking `a` to the origin.
    fn recenter(&self, a: (f64, f64), p: (f64, f64)) -> PyResult<(f64, f64)> {
        self.0.to_origin(pt(a), pt(p)).map(|z| (z.u, z.v)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Surface({:?})", self.kind())
    }
}

/// A run configuration.
#[pyclass(frozen, skip_from_py_object, module = "iuws")]
#[derive(Clone)]
struct Config(RunConfig);

#[pymethods]
impl Config {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        RunConfig::from_json(text).map(Config).map_err(err)
    }

    /// Loads a config file; mask paths resolve relative to it.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        RunConfig::load(&path).map(Config).map_err(err)
    }

    /// The configs of a named corpus.
    #[staticmethod]
    #[pyo3(signature = (name = "standard"))]
    fn corpus(name: &str) -> PyResult<Vec<Config>> {
        iuws_core::corpus(name).map(|v| v.into_iter().map(Config).collect()).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    /// Copy with grid spacing `h` (physical units).
    fn with_h(&self, h: f64) -> PyResult<Self> {
        let c = self.0.clone().with_h(h);
        c.validate().map_err(err)?;
        Ok(Config(c))
    }

    /// Default or configured `rmax`, in model units.
    fn rmax(&self) -> PyResult<f64> {
        self.0.rmax_or_default().map_err(err)
    }

    fn build(&self, py: Python<'_>) -> PyResult<Domain> {
        let sys = py.detach(|| self.0.build()).map_err(err)?;
        let normalized = self.0.normalized().map_err(err)?;
        Ok(Domain { sys: Arc::new(sys), cfg: normalized })
    }

    fn __repr__(&self) -> String {
        format!("Config({:?})", self.0.name)
    }
}

/// Nodal values on the interior nodes of a domain.
#[pyclass(frozen, module = "iuws")]
struct Field {
    sys: Arc<DomainSystem>,
    values: Vec<f64>,
}

#[pymethods]
impl Field {
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        (0..self.sys.len()).map(|i| self.sys.point(i)).map(|p| (p.u, p.v)).collect()
    }

    fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn argmax(&self) -> Option<(f64, f64)> {
        (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .map(|i| self.sys.point(i))
            .map(|p| (p.u, p.v))
    }

    /// Value at the nearest node, zero off the interior.
    fn sample(&self, p: (f64, f64)) -> f64 {
        self.sys.snap_interior(pt(p)).map_or(0.0, |i| self.values[i])
    }

    fn __len__(&self) -> usize {
        self.values.len()
    }
}

/// A discretized domain.
#[pyclass(frozen, module = "iuws")]
struct Domain {
    sys: Arc<DomainSystem>,
    /// The normalized config the domain was built from.
    cfg: RunConfig,
}

impl Domain {
    fn field(&self, values: Vec<f64>) -> Field {
        Field { sys: Arc::clone(&self.sys), values }
    }

    fn width_options(&self) -> CapWidthOptions {
        CapWidthOptions {
            max_centers: self.cfg.max_centers,
            bisect_tol: self.cfg.tolerances.bisect,
            solver_tol: self.cfg.tolerances.solver,
            ..Default::default()
        }
    }
}

#[pymethods]
impl Domain {
    #[getter]
    fn h(&self) -> f64 {
        self.sys.h()
    }

    #[getter]
    fn surface(&self) -> Surface {
        Surface(*self.sys.surface())
    }

    fn __len__(&self) -> usize {
        self.sys.len()
    }

    /// Riemannian area of the discrete domain.
    fn measure(&self) -> f64 {
        domain_measure(&self.sys)
    }

    #[pyo3(signature = (tol = None))]
    fn torsion(&self, py: Python<'_>, tol: Option<f64>) -> PyResult<Field> {
        let tol = tol.unwrap_or(self.cfg.tolerances.solver);
        let v = py.detach(|| elliptic::torsion(&self.sys, tol).map(|t| t.field.into_values())).map_err(err)?;
        Ok(self.field(v))
    }

    /// `(lambda, eigenfunction)` with the eigenfunction of unit mass norm.
    #[pyo3(signature = (tol = None))]
    fn eigen(&self, py: Python<'_>, tol: Option<f64>) -> PyResult<(f64, Field)> {
        let tol = tol.unwrap_or(self.cfg.tolerances.eigen);
        let (lambda, phi) = py
            .detach(|| principal_eigenpair(&self.sys, tol).map(|e| (e.lambda, e.phi.into_values())))
            .map_err(err)?;
        Ok((lambda, self.field(phi)))
    }

    #[pyo3(signature = (pole, tol = None))]
    fn green(&self, py: Python<'_>, pole: (f64, f64), tol: Option<f64>) -> PyResult<Field> {
        let tol = tol.unwrap_or(self.cfg.tolerances.solver);
        let g = py.detach(|| elliptic::green(&self.sys, pt(pole), tol).map(ScalarField::into_values)).map_err(err)?;
        Ok(self.field(g))
    }

    /// `Cap(B̄(x,r) \ D) / Cap(B̄(x,r))`, both relative to `B(x, 2r)`.
    #[pyo3(signature = (x, r, tol = None))]
    fn capacity_ratio(&self, py: Python<'_>, x: (f64, f64), r: f64, tol: Option<f64>) -> PyResult<f64> {
        let tol = tol.unwrap_or(self.cfg.tolerances.solver);
        py.detach(|| capacity_ratio(&self.sys, pt(x), r, tol)).map_err(err)
    }

    /// Capacitary width as a dict; `w` is `inf` when no radius up to `rmax` qualifies.
    #[pyo3(signature = (eta = None, rmax = None))]
    fn cap_width<'py>(&self, py: Python<'py>, eta: Option<f64>, rmax: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let eta = eta.unwrap_or(self.cfg.eta);
        let rmax = match rmax {
            Some(r) => r,
            None => self.cfg.rmax_or_default().map_err(err)?,
        };
        let opts = self.width_options();
        let w = py.detach(|| cap_width_with(&self.sys, eta, rmax, &opts)).map_err(err)?;
        let d = json_to_py(py, &serde_json::to_string(&w).map_err(|e| err(e.into()))?)?;
        // JSON has no infinity; serde writes it as null.
        d.set_item("w", w.w)?;
        Ok(d)
    }

    /// Survival function `P(t, ·)` at each time.
    fn survival(&self, py: Python<'_>, times: Vec<f64>) -> PyResult<Vec<Field>> {
        let run = py
            .detach(|| heat::survival(&self.sys, &times, None).map(|r| r.states.into_iter().map(ScalarField::into_values).collect::<Vec<_>>()))
            .map_err(err)?;
        Ok(run.into_iter().map(|v| self.field(v)).collect())
    }

    /// Heat-kernel columns `p(t, x, ·)`.
    fn heat_kernel(&self, py: Python<'_>, x: (f64, f64), times: Vec<f64>) -> PyResult<Vec<Field>> {
        let cols = py
            .detach(|| {
                heat::heat_kernel_columns(&self.sys, &times, pt(x), None)
                    .map(|r| r.states.into_iter().map(ScalarField::into_values).collect::<Vec<_>>())
            })
            .map_err(err)?;
        Ok(cols.into_iter().map(|v| self.field(v)).collect())
    }

    /// Dyadic evaluation of the integral criterion at base point `o`.
    #[pyo3(signature = (o, tau = None, samples = None, eta = None, rmax = None))]
    fn iu_integral<'py>(
        &self,
        py: Python<'py>,
        o: (f64, f64),
        tau: Option<f64>,
        samples: Option<usize>,
        eta: Option<f64>,
        rmax: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let rmax = match rmax {
            Some(r) => r,
            None => self.cfg.rmax_or_default().map_err(err)?,
        };
        let (samples, eta, opts) = (samples.unwrap_or(self.cfg.samples), eta.unwrap_or(self.cfg.eta), self.width_options());
        let r = py
            .detach(|| heat::iu_integral(&self.sys, pt(o), tau, samples, eta, rmax, &opts))
            .map_err(err)?;
        json_to_py(py, &serde_json::to_string(&r).map_err(|e| err(e.into()))?)
    }

    /// Random-walk survival estimates `[(estimate, stderr), ...]` from `x`.
    #[pyo3(signature = (x, times, paths = None, seed = None, step = None))]
    fn mc_survival(
        &self,
        py: Python<'_>,
        x: (f64, f64),
        times: Vec<f64>,
        paths: Option<usize>,
        seed: Option<u64>,
        step: Option<f64>,
    ) -> PyResult<Vec<(f64, f64)>> {
        let cfg = WalkConfig {
            step: step.unwrap_or(self.sys.h()),
            paths: paths.unwrap_or(self.cfg.paths),
            seed: seed.unwrap_or(self.cfg.seed),
            max_time: times.iter().copied().fold(f64::MIN_POSITIVE, f64::max),
        };
        let est = py
            .detach(|| mc_survival_curve(self.sys.surface(), &self.cfg.domain, pt(x), &times, &cfg))
            .map_err(err)?;
        Ok(est.iter().map(|e| (e.estimate, e.stderr)).collect())
    }
}

/// Runs the check suite and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (only = Vec::new(), corpus = "standard", h = 0.02, seed = 42, timestamps = true))]
fn verify<'py>(
    py: Python<'py>,
    only: Vec<String>,
    corpus: &str,
    h: f64,
    seed: u64,
    timestamps: bool,
) -> PyResult<Bound<'py, PyAny>> {
    iuws_core::corpus(corpus).map_err(err)?;
    let opts = VerifyOptions { corpus: corpus.into(), h, seed, timestamps, only, ..Default::default() };
    let report = py.detach(|| Suite::new(opts).run());
    json_to_py(py, &report.to_json().map_err(err)?)
}

#[pymodule]
fn iuws(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Surface>()?;
    m.add_class::<Config>()?;
    m.add_class::<Domain>()?;
    m.add_class::<Field>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyModule;

    #[test]
    fn module_exposes_solvers() {
        Python::attach(|py| {
            let m = PyModule::new(py, "iuws").unwrap();
            iuws(&m).unwrap();
            let s = m.getattr("Surface").unwrap().call1(("hyperbolic",)).unwrap();
            let d: f64 = s.call_method1("dist", ((0.0, 0.0), (0.5, 0.0))).unwrap().extract().unwrap();
            assert!((d - 2.0 * 0.5f64.atanh()).abs() < 1e-12);
            assert!(m.getattr("Surface").unwrap().call1(("spherical",)).is_err());

            let cfg = r#"{"surface": "euclidean", "window": {"umin": -1.2, "umax": 1.2, "vmin": -1.2, "vmax": 1.2},
                "h": 0.05, "domain": {"kind": "rectangle", "center": {"u": 0, "v": 0}, "width": 1, "height": 1}}"#;
            let dom = m.getattr("Config").unwrap().call_method1("from_json", (cfg,)).unwrap().call_method0("build").unwrap();
            let (lambda, _phi): (f64, Bound<'_, PyAny>) = dom.call_method0("eigen").unwrap().extract().unwrap();
            assert!((lambda / (2.0 * std::f64::consts::PI.powi(2)) - 1.0).abs() < 0.02, "{lambda}");
            let err = dom.call_method1("green", ((5.0, 0.0),)).unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
        });
    }
}
