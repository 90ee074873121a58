//! Five-point stencil operator and a (Jacobi-preconditioned) conjugate gradient solver.

use crate::error::{Error, Result};

pub(crate) const NONE: u32 = u32::MAX;

/// Graph Laplacian of the 5-point stencil restricted to a set of unknowns:
/// `(S u)_i = 4 u_i - Σ_{j ~ i} u_j`, with missing neighbours carrying zero.
#[derive(Debug, Clone, Default)]
pub(crate) struct Stencil {
    pub nbrs: Vec<[u32; 4]>,
}

impl Stencil {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, nb), &xi) in out.iter_mut().zip(&self.nbrs).zip(x) {
            let mut acc = 4.0 * xi;
            for &j in nb {
                if j != NONE {
                    acc -= x[j as usize];
                }
            }
            *o = acc;
        }
    }

    /// `uᵀ S u`, the Dirichlet energy of the zero extension of `u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mut out = vec![0.0; u.len()];
        self.apply(u, &mut out);
        dot(u, &out)
    }
}

/// Modified incomplete Cholesky, MIC(0), of `diag(a) - c·adj` for a stencil
/// whose neighbour slots are `[right, left, up, down]` and whose unknowns are
/// ordered row by row, so left/down neighbours come first.
#[derive(Debug, Clone)]
pub(crate) struct Mic<'s> {
    stencil: &'s Stencil,
    d: Vec<f64>,
    c: f64,
}

const MIC_RELAX: f64 = 0.97;
const BACK: [usize; 2] = [1, 3];
const FWD: [usize; 2] = [0, 2];

impl<'s> Mic<'s> {
    pub fn new(stencil: &'s Stencil, diag: &[f64], c: f64) -> Self {
        let n = stencil.nbrs.len();
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut di = diag[i];
            for &s in &BACK {
                let j = stencil.nbrs[i][s];
                if j == NONE {
                    continue;
                }
                let j = j as usize;
                let others = FWD.iter().filter(|&&f| {
                    let k = stencil.nbrs[j][f];
                    k != NONE && k as usize != i
                });
                di -= c * c * (1.0 + MIC_RELAX * others.count() as f64) / d[j];
            }
            // Guard against breakdown; never triggers for Dirichlet M-matrices.
            d[i] = if di > 1e-3 * diag[i] { di } else { diag[i] };
        }
        Mic { stencil, d, c }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nb = &self.stencil.nbrs;
        let n = r.len();
        for i in 0..n {
            let mut acc = r[i];
            for &s in &BACK {
                let j = nb[i][s];
                if j != NONE {
                    acc += self.c * z[j as usize];
                }
            }
            z[i] = acc / self.d[i];
        }
        for i in (0..n).rev() {
            let mut acc = 0.0;
            for &s in &FWD {
                let j = nb[i][s];
                if j != NONE {
                    acc += z[j as usize];
                }
            }
            z[i] += self.c * acc / self.d[i];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_norm(r: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        Some(w) => r.iter().zip(w).map(|(x, wi)| x * x * wi).sum::<f64>().sqrt(),
        None => dot(r, r).sqrt(),
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
}

/// Applies `z = P⁻¹ r`.
pub(crate) type Precond<'a> = &'a dyn Fn(&[f64], &mut [f64]);

/// Solves `A x = b` for SPD `A` given as a matvec, starting from the contents
/// of `x`, with an optional SPD preconditioner.
///
/// Convergence is measured as `‖b - A x‖_W ≤ tol · ‖b‖_W` where `W` is the
/// diagonal `norm_weights` (Euclidean if `None`).
pub(crate) fn pcg<A>(
    apply: A,
    precond: Option<Precond<'_>>,
    norm_weights: Option<&[f64]>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    pcg_monitored(apply, precond, norm_weights, b, x, tol, max_iter, None)
}

/// Per-iteration data handed to a CG monitor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CgProgress {
    /// Decrease of `½xᵀAx - bᵀx` achieved by the step just taken.
    pub objective_drop: f64,
    /// Squared Euclidean norm of the new residual.
    pub residual_sq: f64,
}

/// [`pcg`] with a monitor called after every iteration; returning `true`
/// stops the iteration early (reported as converged).
#[allow(clippy::too_many_arguments)]
pub(crate) fn pcg_monitored<A>(
    apply: A,
    precond: Option<Precond<'_>>,
    norm_weights: Option<&[f64]>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    mut monitor: Option<&mut dyn FnMut(CgProgress) -> bool>,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = weighted_norm(b, norm_weights);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Some(p) => p(r, z),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = weighted_norm(&r, norm_weights) / bnorm;
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(m) = monitor.as_deref_mut() {
            // With pᵀr = rᵀz the objective drops by α rᵀz / 2.
            if m(CgProgress { objective_drop: 0.5 * alpha * rz, residual_sq: dot(&r, &r) }) {
                return Ok(CgOutcome { iterations: it + 1 });
            }
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = weighted_norm(&r, norm_weights) / bnorm;
    }
    Ok(CgOutcome { iterations: it })
}

/// Default iteration cap `50 √n`.
pub(crate) fn default_max_iter(n: usize) -> usize {
    ((50.0 * (n as f64).sqrt()).ceil() as usize).max(100)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Stencil {
        // A 1 x n row of nodes: left/right neighbours only.
        let nbrs = (0..n)
            .map(|i| {
                let l = if i > 0 { (i - 1) as u32 } else { NONE };
                let r = if i + 1 < n { (i + 1) as u32 } else { NONE };
                [l, r, NONE, NONE]
            })
            .collect();
        Stencil { nbrs }
    }

    #[test]
    fn cg_solves_chain() {
        let s = chain(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 50];
        pcg(|u, o| s.apply(u, o), None, None, &b, &mut x, 1e-12, 1000).unwrap();
        let mut ax = vec![0.0; 50];
        s.apply(&x, &mut ax);
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-9);
        }
    }

    #[test]
    fn mic_preconditioner_cuts_iterations() {
        // 40 x 40 square grid.
        let m = 40usize;
        let id = |k: usize, l: usize| (l * m + k) as u32;
        let nbrs = (0..m * m)
            .map(|g| {
                let (k, l) = (g % m, g / m);
                [
                    if k + 1 < m { id(k + 1, l) } else { NONE },
                    if k > 0 { id(k - 1, l) } else { NONE },
                    if l + 1 < m { id(k, l + 1) } else { NONE },
                    if l > 0 { id(k, l - 1) } else { NONE },
                ]
            })
            .collect();
        let s = Stencil { nbrs };
        let b = vec![1.0; m * m];
        let mut x0 = vec![0.0; m * m];
        let plain = pcg(|u, o| s.apply(u, o), None, None, &b, &mut x0, 1e-10, 10_000).unwrap();
        let mic = Mic::new(&s, &vec![4.0; m * m], 1.0);
        let pre = |r: &[f64], z: &mut [f64]| mic.apply(r, z);
        let mut x1 = vec![0.0; m * m];
        let fast = pcg(|u, o| s.apply(u, o), Some(&pre), None, &b, &mut x1, 1e-10, 10_000).unwrap();
        assert!(fast.iterations * 2 < plain.iterations, "{} vs {}", fast.iterations, plain.iterations);
        for (a, c) in x0.iter().zip(&x1) {
            assert!((a - c).abs() < 1e-6 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let s = chain(5);
        let mut x = vec![1.0; 5];
        pcg(|u, o| s.apply(u, o), None, None, &[0.0; 5], &mut x, 1e-8, 10).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let s = chain(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        let err = pcg(|u, o| s.apply(u, o), None, None, &b, &mut x, 1e-14, 3).unwrap_err();
        match err {
            Error::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }
}
