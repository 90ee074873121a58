//! Discrete Dirichlet problems: torsion function, Green function, harmonic
//! measure and condenser capacity.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{ModelSurface, Point};
use crate::linalg::{default_max_iter, pcg, pcg_monitored, CgProgress, Mic, Stencil, NONE};
use crate::mesh::{DomainSystem, LatticeNode, Window};

/// Default relative residual for linear solves.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Nodal values on the interior of a [`DomainSystem`], extended by zero.
#[derive(Debug, Clone)]
pub struct ScalarField<'a> {
    system: &'a DomainSystem,
    values: Vec<f64>,
}

impl<'a> ScalarField<'a> {
    pub fn new(system: &'a DomainSystem, values: Vec<f64>) -> Result<Self> {
        if values.len() != system.len() {
            return Err(Error::DegenerateInput(format!(
                "field has {} values for {} interior nodes",
                values.len(),
                system.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("field has non-finite values".into()));
        }
        Ok(ScalarField { system, values })
    }

    pub fn zeros(system: &'a DomainSystem) -> Self {
        ScalarField { system, values: vec![0.0; system.len()] }
    }

    pub(crate) fn from_raw(system: &'a DomainSystem, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), system.len());
        ScalarField { system, values }
    }

    /// Builds a field by evaluating `f` at every interior node.
    pub fn from_fn(system: &'a DomainSystem, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..system.len()).map(|i| f(system.point(i))).collect();
        Self::new(system, values)
    }

    pub fn system(&self) -> &'a DomainSystem {
        self.system
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn argmax(&self) -> Option<usize> {
        (0..self.values.len()).max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    /// Value at the lattice node nearest `p`; zero off the interior.
    pub fn sample(&self, p: Point) -> f64 {
        self.system.snap_interior(p).map_or(0.0, |i| self.values[i])
    }

    /// `(u, v, value)` rows for every interior node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,y,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.system.point(i);
            writeln!(out, "{},{},{}", p.u, p.v, v)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Solves `S u = rhs` on the interior with zero Dirichlet data.
pub fn solve_dirichlet<'a>(sys: &'a DomainSystem, rhs: &[f64], tol: f64) -> Result<ScalarField<'a>> {
    let mut u = vec![0.0; sys.len()];
    solve_into(sys, rhs, &mut u, tol)?;
    Ok(ScalarField::from_raw(sys, u))
}

/// Warm-started variant used by the eigen solver. Residuals are measured in
/// the inverse-mass norm.
pub(crate) fn solve_into(sys: &DomainSystem, rhs: &[f64], u: &mut [f64], tol: f64) -> Result<usize> {
    if rhs.len() != sys.len() {
        return Err(Error::DegenerateInput("right-hand side length mismatch".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let weights: Vec<f64> = sys.mass().iter().map(|m| 1.0 / m).collect();
    let st = sys.stencil();
    let mic = Mic::new(st, &vec![4.0; st.nbrs.len()], 1.0);
    let pre = |r: &[f64], z: &mut [f64]| mic.apply(r, z);
    let out = pcg(
        |x, o| st.apply(x, o),
        Some(&pre),
        Some(&weights),
        rhs,
        u,
        tol,
        default_max_iter(sys.len()),
    )?;
    Ok(out.iterations)
}

/// Torsion function and its supremum.
#[derive(Debug, Clone)]
pub struct Torsion<'a> {
    pub field: ScalarField<'a>,
    pub sup: f64,
}

/// Solves the discrete de Saint-Venant problem `-Δ_g v = 1`, `v = 0` off `D`.
pub fn torsion(sys: &DomainSystem, tol: f64) -> Result<Torsion<'_>> {
    if sys.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let field = solve_dirichlet(sys, sys.mass(), tol)?;
    let sup = field.max();
    Ok(Torsion { field, sup })
}

/// Green function with a unit nodal source at the interior node nearest `pole`.
pub fn green<'a>(sys: &'a DomainSystem, pole: Point, tol: f64) -> Result<ScalarField<'a>> {
    let i = sys
        .snap_interior(pole)
        .ok_or(Error::InvalidPole { u: pole.u, v: pole.v })?;
    let mut rhs = vec![0.0; sys.len()];
    rhs[i] = 1.0;
    solve_dirichlet(sys, &rhs, tol)
}

/// Harmonic function equal to 1 on the boundary nodes in `target` and 0 on the
/// remaining boundary nodes.
pub fn harmonic_measure<'a>(
    sys: &'a DomainSystem,
    target: &[LatticeNode],
    tol: f64,
) -> Result<ScalarField<'a>> {
    if target.is_empty() {
        return Err(Error::DegenerateTarget("target set is empty".into()));
    }
    let boundary: HashSet<LatticeNode> = sys.boundary_nodes().into_iter().collect();
    if let Some(bad) = target.iter().find(|n| !boundary.contains(n)) {
        return Err(Error::DegenerateTarget(format!("node {bad:?} is not a boundary node")));
    }
    let target: HashSet<LatticeNode> = target.iter().copied().collect();
    let fixed = vec![false; sys.len()];
    let u = constrained_harmonic(sys, &fixed, |n| target.contains(&n), tol)?;
    Ok(ScalarField::from_raw(sys, u))
}

/// Dirichlet problem on the interior nodes not fixed to 1, in compact
/// numbering (free nodes keep their relative order, so the stencil slots and
/// row-by-row ordering are preserved).
struct ConstrainedProblem {
    free: Vec<usize>,
    stencil: Stencil,
    rhs: Vec<f64>,
}

impl ConstrainedProblem {
    fn new(sys: &DomainSystem, fixed_one: &[bool], exterior_one: impl Fn(LatticeNode) -> bool) -> Self {
        let n = sys.len();
        let mut compact = vec![NONE; n];
        let mut free = Vec::new();
        for i in 0..n {
            if !fixed_one[i] {
                compact[i] = free.len() as u32;
                free.push(i);
            }
        }
        let mut nbrs = Vec::with_capacity(free.len());
        let mut rhs = Vec::with_capacity(free.len());
        for &i in &free {
            let (k, l) = sys.lattice(i);
            let mut row = [NONE; 4];
            let mut b = 0.0;
            for (slot, nb) in row.iter_mut().zip([(k + 1, l), (k - 1, l), (k, l + 1), (k, l - 1)]) {
                match sys.index_at(nb) {
                    Some(j) if fixed_one[j] => b += 1.0,
                    Some(j) => *slot = compact[j],
                    None if exterior_one(nb) => b += 1.0,
                    None => {}
                }
            }
            nbrs.push(row);
            rhs.push(b);
        }
        ConstrainedProblem { free, stencil: Stencil { nbrs }, rhs }
    }

    fn solve(&self, tol: f64, monitor: Option<&mut dyn FnMut(CgProgress) -> bool>) -> Result<Vec<f64>> {
        let st = &self.stencil;
        let mic = Mic::new(st, &vec![4.0; self.free.len()], 1.0);
        let pre = |r: &[f64], z: &mut [f64]| mic.apply(r, z);
        let mut x = vec![0.0; self.free.len()];
        pcg_monitored(
            |u, o| st.apply(u, o),
            Some(&pre),
            None,
            &self.rhs,
            &mut x,
            tol,
            default_max_iter(self.free.len()),
            monitor,
        )?;
        Ok(x)
    }

    fn expand(&self, n: usize, x: &[f64]) -> Vec<f64> {
        let mut u = vec![1.0; n];
        for (&i, &xi) in self.free.iter().zip(x) {
            u[i] = xi;
        }
        u
    }
}

/// Harmonic on the free interior nodes, equal to 1 on interior nodes flagged in
/// `fixed_one` and on exterior nodes where `exterior_one` holds, 0 elsewhere.
pub(crate) fn constrained_harmonic(
    sys: &DomainSystem,
    fixed_one: &[bool],
    exterior_one: impl Fn(LatticeNode) -> bool,
    tol: f64,
) -> Result<Vec<f64>> {
    let problem = ConstrainedProblem::new(sys, fixed_one, exterior_one);
    let x = problem.solve(tol, None)?;
    Ok(problem.expand(sys.len(), &x))
}

/// Capacity of a node set relative to the condenser `B(x, 2r)`.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    condenser: DomainSystem,
    potential: Vec<f64>,
}

impl CapacityResult {
    /// The condenser `B(x, 2r)` as a domain system.
    pub fn condenser(&self) -> &DomainSystem {
        &self.condenser
    }

    /// Capacitary potential on the condenser.
    pub fn potential(&self) -> ScalarField<'_> {
        ScalarField::from_raw(&self.condenser, self.potential.clone())
    }
}

struct Condenser {
    system: DomainSystem,
    fixed: Vec<bool>,
    /// Smallest eigenvalue of the unit 5-point Laplacian on the box of
    /// non-border nodes of the local window; bounds that of any subset below.
    lambda_floor: f64,
}

fn condenser(
    surface: ModelSurface,
    window: &Window,
    x: Point,
    r: f64,
    in_set: impl Fn(LatticeNode) -> bool,
) -> Result<Condenser> {
    surface.check(x)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    let (c, s) = surface.chart_ball(x, 2.0 * r)?;
    if !window.contains_box(c.u - s, c.u + s, c.v - s, c.v + s, 0.0) {
        return Err(Error::GeometryOverflow(format!(
            "condenser B(({}, {}), {}) leaves the window",
            x.u,
            x.v,
            2.0 * r
        )));
    }
    let h = window.h();
    let local = Window::covering(c.u - s, c.u + s, c.v - s, c.v + s, h, 1)?;
    let outer = 2.0 * r;
    let system = DomainSystem::from_predicate(surface, local, |_, p| surface.dist_unchecked(x, p) < outer);
    let closed = r + 1e-9;
    let fixed = (0..system.len())
        .map(|i| surface.dist_unchecked(x, system.point(i)) <= closed && in_set(system.lattice(i)))
        .collect();
    let (nu, nv) = local.dims();
    let floor = |m: usize| 4.0 * (std::f64::consts::PI / (2.0 * (m.saturating_sub(2) as f64 + 1.0))).sin().powi(2);
    Ok(Condenser { system, fixed, lambda_floor: floor(nu) + floor(nv) })
}

/// Relative capacity `Cap_{B(x,2r)}(E)` for the lattice nodes of the closed
/// ball `B̄(x, r)` selected by `in_set`, computed as the chart Dirichlet energy
/// of the capacitary potential.
pub fn capacity(
    surface: ModelSurface,
    window: &Window,
    x: Point,
    r: f64,
    in_set: impl Fn(LatticeNode) -> bool,
    tol: f64,
) -> Result<CapacityResult> {
    let Condenser { system, fixed, .. } = condenser(surface, window, x, r, in_set)?;
    if !fixed.iter().any(|&f| f) {
        let potential = vec![0.0; system.len()];
        return Ok(CapacityResult { value: 0.0, condenser: system, potential });
    }
    let potential = constrained_harmonic(&system, &fixed, |_| false, tol)?;
    let value = system.energy(&potential);
    Ok(CapacityResult { value, condenser: system, potential })
}

/// Decides `Cap_{B(x,2r)}(E) ≥ threshold`, stopping the solve as soon as
/// the energy bracket excludes one side.
///
/// From `x₀ = 0` the CG iterates give `Cap ≤ 2J_k + c`, and convexity gives
/// `Cap ≥ 2J_k + c - ‖r_k‖² / λ_min`, where `J` is the quadratic objective and
/// `c` the energy carried by edges leaving the fixed set.
pub(crate) fn capacity_at_least(
    surface: ModelSurface,
    window: &Window,
    x: Point,
    r: f64,
    in_set: impl Fn(LatticeNode) -> bool,
    threshold: f64,
    tol: f64,
) -> Result<bool> {
    let Condenser { system, fixed, lambda_floor } = condenser(surface, window, x, r, in_set)?;
    if !fixed.iter().any(|&f| f) {
        return Ok(0.0 >= threshold);
    }
    let problem = ConstrainedProblem::new(&system, &fixed, |_| false);
    let mut edge_energy = 0.0;
    for i in (0..system.len()).filter(|&i| fixed[i]) {
        edge_energy += 4.0 - system.neighbors(i).filter(|&j| fixed[j]).count() as f64;
    }
    let slack = 1e-10 * threshold.abs().max(1.0);
    let mut objective = 0.0;
    let mut verdict = None;
    let mut monitor = |p: CgProgress| {
        objective -= p.objective_drop;
        let upper = 2.0 * objective + edge_energy;
        let lower = upper - p.residual_sq / lambda_floor;
        if lower >= threshold + slack {
            verdict = Some(true);
        } else if upper < threshold - slack {
            verdict = Some(false);
        }
        verdict.is_some()
    };
    let x_free = problem.solve(tol, Some(&mut monitor))?;
    if let Some(v) = verdict {
        return Ok(v);
    }
    let potential = problem.expand(system.len(), &x_free);
    Ok(system.energy(&potential) >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_system, DomainSpec};
    use std::f64::consts::PI;

    fn disk(surface: ModelSurface, radius: f64, half: f64, h: f64) -> DomainSystem {
        build_system(
            surface,
            Window::centered(half, h).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius },
        )
        .unwrap()
    }

    #[test]
    fn capacity_decision_agrees_with_value() {
        let s = ModelSurface::euclidean();
        let w = Window::centered(1.0, 0.02).unwrap();
        let half = |n: LatticeNode| n.1 < 0;
        let cap = capacity(s, &w, Point::ORIGIN, 0.3, half, 1e-12).unwrap().value;
        for f in [0.5, 0.9, 0.999, 1.001, 1.1, 2.0] {
            let got = capacity_at_least(s, &w, Point::ORIGIN, 0.3, half, f * cap, 1e-10).unwrap();
            assert_eq!(got, f <= 1.0, "{f}");
        }
    }

    #[test]
    fn zero_rhs() {
        let sys = disk(ModelSurface::euclidean(), 1.0, 1.2, 0.1);
        let u = solve_dirichlet(&sys, &vec![0.0; sys.len()], 1e-8).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strip_torsion_matches_two_point_problem() {
        // Long strip 0 < v < 1: away from the ends v(x) = x(1-x)/2.
        let h = 0.02;
        let sys = build_system(
            ModelSurface::euclidean(),
            Window::new(-3.2, 3.2, -0.2, 1.2, h).unwrap(),
            &DomainSpec::Rectangle { center: Point::new(0.0, 0.5), width: 6.0, height: 1.0 },
        )
        .unwrap();
        let t = torsion(&sys, 1e-10).unwrap();
        assert!((t.sup - 0.125).abs() < 0.002, "{}", t.sup);
        let mid = t.field.sample(Point::new(0.0, 0.24));
        assert!((mid - 0.24 * 0.76 / 2.0).abs() < 0.002, "{mid}");
    }

    #[test]
    fn disk_torsion_and_green() {
        let sys = disk(ModelSurface::euclidean(), 1.0, 1.1, 0.02);
        let t = torsion(&sys, 1e-9).unwrap();
        assert!((t.sup / 0.25 - 1.0).abs() < 0.02);
        assert!(t.field.min() >= 0.0);
        let g = green(&sys, Point::ORIGIN, 1e-10).unwrap();
        let exact = 2f64.ln() / (2.0 * PI);
        assert!((g.sample(Point::new(0.5, 0.0)) / exact - 1.0).abs() < 0.03);
        assert!(matches!(green(&sys, Point::new(1.05, 0.0), 1e-8), Err(Error::InvalidPole { .. })));
    }

    #[test]
    fn harmonic_measure_all_boundary_is_one() {
        let sys = disk(ModelSurface::euclidean(), 0.5, 0.7, 0.05);
        let u = harmonic_measure(&sys, &sys.boundary_nodes(), 1e-10).unwrap();
        assert!(u.values().iter().all(|&v| (v - 1.0).abs() < 1e-8));
        assert!(matches!(harmonic_measure(&sys, &[], 1e-8), Err(Error::DegenerateTarget(_))));
        assert!(harmonic_measure(&sys, &[(0, 0)], 1e-8).is_err());
    }

    #[test]
    fn empty_capacity_is_zero() {
        let w = Window::centered(2.0, 0.05).unwrap();
        let c = capacity(ModelSurface::euclidean(), &w, Point::ORIGIN, 0.5, |_| false, 1e-8).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.potential().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn capacity_overflow() {
        let w = Window::centered(1.0, 0.05).unwrap();
        let err = capacity(ModelSurface::euclidean(), &w, Point::ORIGIN, 0.6, |_| true, 1e-8).unwrap_err();
        assert!(matches!(err, Error::GeometryOverflow(_)));
    }

    #[test]
    fn potential_bounded_and_energy_consistent() {
        let w = Window::centered(1.5, 0.05).unwrap();
        let c = capacity(ModelSurface::euclidean(), &w, Point::ORIGIN, 0.5, |(k, _)| k > 2, 1e-10).unwrap();
        let pot = c.potential();
        assert!(pot.values().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        assert!((c.condenser().energy(pot.values()) - c.value).abs() < 1e-12 * c.value);
    }
}
