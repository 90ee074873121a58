//! Bottom of the Dirichlet spectrum via inverse iteration on `S φ = λ M φ`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::capwidth::{cap_width_with, CapWidthOptions, CapWidthResult};
use crate::elliptic::{solve_into, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::DomainSystem;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-6;
const MAX_SOLVES: usize = 2000;
const KRYLOV_DIM: usize = 12;

/// Principal eigenpair.
#[derive(Debug, Clone)]
pub struct SpectralResult<'a> {
    pub lambda: f64,
    /// Mass-normalized, positive; zero off the component it was computed on.
    pub phi: ScalarField<'a>,
    /// `‖Sφ - λMφ‖_{M⁻¹} / λ`.
    pub residual: f64,
    /// Linear solves spent.
    pub iterations: usize,
    /// The interior had several components; only the largest was used.
    pub disconnected: bool,
}

/// Smallest generalized eigenvalue and its eigenfunction.
pub fn principal_eigenpair(sys: &DomainSystem, tol: f64) -> Result<SpectralResult<'_>> {
    if sys.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let comps = sys.components();
    let disconnected = comps.len() > 1;
    let (lambda, phi, residual, iterations) = if disconnected {
        let mut keep = vec![false; sys.len()];
        for &i in &comps[0] {
            keep[i] = true;
        }
        let sub = sys.restrict(|i| keep[i]);
        let (lambda, phi_sub, residual, it) = inverse_iteration(&sub, tol)?;
        let mut phi = vec![0.0; sys.len()];
        for (j, v) in phi_sub.into_iter().enumerate() {
            let i = sys.index_at(sub.lattice(j)).expect("component node is interior");
            phi[i] = v;
        }
        (lambda, phi, residual, it)
    } else {
        inverse_iteration(sys, tol)?
    };
    Ok(SpectralResult { lambda, phi: ScalarField::from_raw(sys, phi), residual, iterations, disconnected })
}

fn normalize(sys: &DomainSystem, x: &mut [f64]) {
    let n = sys.mass_dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

fn eigen_residual(sys: &DomainSystem, x: &[f64], sx: &mut [f64]) -> (f64, f64) {
    sys.apply_stiffness(x, sx);
    let lambda: f64 = x.iter().zip(sx.iter()).map(|(a, b)| a * b).sum();
    let res: f64 = sx
        .iter()
        .zip(x)
        .zip(sys.mass())
        .map(|((s, xi), m)| {
            let r = s - lambda * m * xi;
            r * r / m
        })
        .sum::<f64>()
        .sqrt();
    (lambda, res / lambda)
}

/// Restarted Krylov iteration on `S⁻¹M` with Rayleigh-Ritz extraction. Each
/// cycle spans `x, S⁻¹Mx, …` and restarts from the lowest Ritz vector, which
/// converges far faster than plain inverse iteration when the gap is small.
fn inverse_iteration(sys: &DomainSystem, tol: f64) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = sys.len();
    let inner_tol = (tol * 1e-2).min(1e-8);
    let mut x = vec![1.0; n];
    normalize(sys, &mut x);
    let mut sx = vec![0.0; n];
    let (mut lambda, mut res) = eigen_residual(sys, &x, &mut sx);
    let mut solves = 0;
    while res > tol {
        if solves >= MAX_SOLVES {
            return Err(Error::NoConvergence { iterations: solves, residual: res });
        }
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        while basis.len() < KRYLOV_DIM.min(n) {
            let last = basis.last().expect("basis is non-empty");
            let rhs: Vec<f64> = last.iter().zip(sys.mass()).map(|(a, m)| a * m).collect();
            let mut w = vec![0.0; n];
            solve_into(sys, &rhs, &mut w, inner_tol)?;
            solves += 1;
            let before = sys.mass_dot(&w, &w).sqrt();
            for _ in 0..2 {
                for v in &basis {
                    let c = sys.mass_dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let after = sys.mass_dot(&w, &w).sqrt();
            if !(after > 1e-10 * before) {
                break;
            }
            w.iter_mut().for_each(|v| *v /= after);
            basis.push(w);
        }
        let k = basis.len();
        let sv: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| {
                let mut o = vec![0.0; n];
                sys.apply_stiffness(v, &mut o);
                o
            })
            .collect();
        let t = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&basis[i], &sv[j]) + dot(&basis[j], &sv[i])));
        let eig = SymmetricEigen::new(t);
        let lo = eig.eigenvalues.imin();
        let y = eig.eigenvectors.column(lo);
        x.iter_mut().for_each(|v| *v = 0.0);
        for (c, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
        }
        normalize(sys, &mut x);
        (lambda, res) = eigen_residual(sys, &x, &mut sx);
        if k == 1 {
            break;
        }
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((lambda, x, res, solves))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `fᵀ S f / fᵀ M f`.
pub fn rayleigh_quotient(sys: &DomainSystem, f: &ScalarField<'_>) -> Result<f64> {
    let v = f.values();
    let denom = sys.mass_dot(v, v);
    if denom == 0.0 {
        return Err(Error::DegenerateInput("Rayleigh quotient of the zero field".into()));
    }
    Ok(sys.energy(v) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailWidth {
    pub radius: f64,
    pub width: CapWidthResult,
}

/// Capacitary widths of the tails `D \ B̄(o, R)`.
pub fn tail_width_probe(
    sys: &DomainSystem,
    o: Point,
    radii: &[f64],
    eta: f64,
    rmax: f64,
    opts: &CapWidthOptions,
) -> Result<Vec<TailWidth>> {
    sys.surface().check(o)?;
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("tail radii must be strictly increasing".into()));
    }
    let surface = *sys.surface();
    radii
        .iter()
        .map(|&radius| {
            let tail = sys.restrict(|i| surface.dist_unchecked(o, sys.point(i)) > radius);
            let width = cap_width_with(&tail, eta, rmax, opts)?;
            Ok(TailWidth { radius, width })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::torsion;
    use crate::geometry::ModelSurface;
    use crate::mesh::{build_system, DomainSpec, Window};
    use std::f64::consts::PI;

    #[test]
    fn rectangle_eigenvalue() {
        let sys = build_system(
            ModelSurface::euclidean(),
            Window::new(-0.1, 1.1, -0.1, 2.1, 0.01).unwrap(),
            &DomainSpec::Rectangle { center: Point::new(0.5, 1.0), width: 1.0, height: 2.0 },
        )
        .unwrap();
        let e = principal_eigenpair(&sys, 1e-8).unwrap();
        let exact = PI * PI * (1.0 + 0.25);
        assert!((e.lambda / exact - 1.0).abs() < 0.01, "{}", e.lambda);
        assert!(e.residual <= 1e-8);
        assert!((sys.mass_dot(e.phi.values(), e.phi.values()) - 1.0).abs() < 1e-12);
        assert!(e.phi.values().iter().all(|&v| v > 0.0));
        let rq = rayleigh_quotient(&sys, &e.phi).unwrap();
        assert!((rq - e.lambda).abs() < 1e-8 * e.lambda);
    }

    #[test]
    fn torsion_is_a_good_trial_function() {
        let sys = build_system(
            ModelSurface::euclidean(),
            Window::centered(1.1, 0.02).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap();
        let e = principal_eigenpair(&sys, 1e-6).unwrap();
        let t = torsion(&sys, 1e-9).unwrap();
        let q = rayleigh_quotient(&sys, &t.field).unwrap();
        assert!(q >= e.lambda * (1.0 - 1e-6) && q <= 1.2 * e.lambda);
        assert!(rayleigh_quotient(&sys, &ScalarField::zeros(&sys)).is_err());
    }

    #[test]
    fn disconnected_uses_largest_component() {
        let s = ModelSurface::euclidean();
        let w = Window::new(-1.0, 3.0, -1.0, 1.0, 0.05).unwrap();
        let sys = DomainSystem::from_predicate(s, w, |_, p| p.norm() < 0.6 || (p.u - 2.0).hypot(p.v) < 0.3);
        let e = principal_eigenpair(&sys, 1e-7).unwrap();
        assert!(e.disconnected);
        // Zero on the small disk.
        assert_eq!(e.phi.sample(Point::new(2.0, 0.0)), 0.0);
        let j01 = 2.404825557695773f64;
        assert!((e.lambda * 0.36 / (j01 * j01) - 1.0).abs() < 0.05);
    }

    #[test]
    fn bounded_domain_tail_is_empty() {
        let sys = build_system(
            ModelSurface::euclidean(),
            Window::centered(1.0, 0.05).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 0.3 },
        )
        .unwrap();
        let tails = tail_width_probe(&sys, Point::ORIGIN, &[0.5], 0.5, 0.2, &CapWidthOptions::default()).unwrap();
        assert_eq!(tails[0].width.w, 0.0);
        assert!(tail_width_probe(&sys, Point::ORIGIN, &[0.5, 0.4], 0.5, 0.2, &CapWidthOptions::default()).is_err());
    }
}
