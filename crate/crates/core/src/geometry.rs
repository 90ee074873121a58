//! Model surfaces: the Euclidean plane and the hyperbolic plane of curvature -1
//! in the Poincaré disk chart.
//!
//! Both surfaces are represented in a flat chart with a conformal metric
//! `g = a(z) |dz|²`, so the area density is `a(z)` and the Laplace–Beltrami
//! operator is `a(z)⁻¹ Δ`. The Dirichlet energy `∫|∇f|² dμ` does not see `a` at
//! all in two dimensions, which is what makes the grid discretization in
//! [`crate::mesh`] work.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Euclidean,
    Hyperbolic,
}

/// The ambient surface. Curvature is `0` or `-1`; other negative curvatures
/// are reached by rescaling lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSurface {
    kind: SurfaceKind,
}

/// Chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Point { u, v }
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    fn from_complex(z: Complex64) -> Self {
        Point { u: z.re, v: z.im }
    }
}

impl ModelSurface {
    pub fn new(kind: SurfaceKind) -> Self {
        ModelSurface { kind }
    }

    pub fn euclidean() -> Self {
        Self::new(SurfaceKind::Euclidean)
    }

    pub fn hyperbolic() -> Self {
        Self::new(SurfaceKind::Hyperbolic)
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.kind == SurfaceKind::Hyperbolic
    }

    pub fn curvature(&self) -> f64 {
        match self.kind {
            SurfaceKind::Euclidean => 0.0,
            SurfaceKind::Hyperbolic => -1.0,
        }
    }

    /// Lower Ricci bound constant `K` with `Ric ≥ -K`.
    pub fn ricci_bound(&self) -> f64 {
        -self.curvature()
    }

    pub fn is_valid(&self, p: Point) -> bool {
        if !(p.u.is_finite() && p.v.is_finite()) {
            return false;
        }
        match self.kind {
            SurfaceKind::Euclidean => true,
            SurfaceKind::Hyperbolic => p.u * p.u + p.v * p.v < 1.0,
        }
    }

    pub fn check(&self, p: Point) -> Result<()> {
        if self.is_valid(p) {
            Ok(())
        } else {
            Err(Error::InvalidPoint { u: p.u, v: p.v })
        }
    }

    /// Geodesic distance.
    pub fn dist(&self, p: Point, q: Point) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.dist_unchecked(p, q))
    }

    /// Same as [`ModelSurface::dist`] for points already known to be valid.
    pub(crate) fn dist_unchecked(&self, p: Point, q: Point) -> f64 {
        match self.kind {
            SurfaceKind::Euclidean => (p.u - q.u).hypot(p.v - q.v),
            SurfaceKind::Hyperbolic => {
                let zp = p.to_complex();
                let zq = q.to_complex();
                let num = (zp - zq).norm();
                if num == 0.0 {
                    return 0.0;
                }
                let den = (Complex64::new(1.0, 0.0) - zp * zq.conj()).norm();
                2.0 * (num / den).min(1.0).atanh()
            }
        }
    }

    /// Area density of the Riemannian measure in the chart.
    pub fn conformal_weight(&self, p: Point) -> Result<f64> {
        self.check(p)?;
        Ok(self.weight_unchecked(p))
    }

    pub(crate) fn weight_unchecked(&self, p: Point) -> f64 {
        match self.kind {
            SurfaceKind::Euclidean => 1.0,
            SurfaceKind::Hyperbolic => {
                let s = 1.0 - (p.u * p.u + p.v * p.v);
                4.0 / (s * s)
            }
        }
    }

    /// Volume of a geodesic ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(match self.kind {
            SurfaceKind::Euclidean => PI * r * r,
            // 2π(cosh r - 1) = 4π sinh²(r/2), the second form is exact near 0.
            SurfaceKind::Hyperbolic => 4.0 * PI * (0.5 * r).sinh().powi(2),
        })
    }

    /// Chart radius of a geodesic ball of radius `r` centred at the chart origin.
    pub fn geodesic_to_chart_radius(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(match self.kind {
            SurfaceKind::Euclidean => r,
            SurfaceKind::Hyperbolic => (0.5 * r).tanh(),
        })
    }

    /// Inverse of [`ModelSurface::geodesic_to_chart_radius`].
    pub fn chart_to_geodesic_radius(&self, s: f64) -> Result<f64> {
        check_radius(s)?;
        match self.kind {
            SurfaceKind::Euclidean => Ok(s),
            SurfaceKind::Hyperbolic if s < 1.0 => Ok(2.0 * s.atanh()),
            SurfaceKind::Hyperbolic => Err(Error::InvalidPoint { u: s, v: 0.0 }),
        }
    }

    /// The chart image of the geodesic ball `B(center, r)`, as a Euclidean
    /// (centre, radius) pair. Hyperbolic balls are moved to the origin, converted,
    /// and moved back by the disk automorphism.
    pub fn chart_ball(&self, center: Point, r: f64) -> Result<(Point, f64)> {
        self.check(center)?;
        let s = self.geodesic_to_chart_radius(r)?;
        match self.kind {
            SurfaceKind::Euclidean => Ok((center, s)),
            SurfaceKind::Hyperbolic => {
                let a = center.to_complex();
                let a2 = a.norm_sqr();
                let den = 1.0 - s * s * a2;
                let c = a * ((1.0 - s * s) / den);
                let radius = s * (1.0 - a2) / den;
                Ok((Point::from_complex(c), radius))
            }
        }
    }

    /// Disk automorphism sending `a` to the origin (identity shift on the plane).
    pub fn to_origin(&self, a: Point, z: Point) -> Result<Point> {
        self.check(a)?;
        self.check(z)?;
        Ok(match self.kind {
            SurfaceKind::Euclidean => Point::new(z.u - a.u, z.v - a.v),
            SurfaceKind::Hyperbolic => {
                let a = a.to_complex();
                let z = z.to_complex();
                Point::from_complex((z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z))
            }
        })
    }

    /// Inverse of [`ModelSurface::to_origin`].
    pub fn from_origin(&self, a: Point, w: Point) -> Result<Point> {
        self.check(a)?;
        self.check(w)?;
        Ok(match self.kind {
            SurfaceKind::Euclidean => Point::new(w.u + a.u, w.v + a.v),
            SurfaceKind::Hyperbolic => {
                let a = a.to_complex();
                let w = w.to_complex();
                Point::from_complex((w + a) / (Complex64::new(1.0, 0.0) + a.conj() * w))
            }
        })
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be finite and nonnegative, got {r}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_distance() {
        let s = ModelSurface::euclidean();
        assert_eq!(s.dist(Point::new(0.0, 0.0), Point::new(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn hyperbolic_distance() {
        let s = ModelSurface::hyperbolic();
        let p = Point::new(0.3, -0.2);
        assert_eq!(s.dist(p, p).unwrap(), 0.0);
        let q = Point::new(0.5f64.tanh(), 0.0);
        assert_relative_eq!(s.dist(Point::ORIGIN, q).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(
            s.dist(Point::new(1.0, 0.0), p),
            Err(Error::InvalidPoint { .. })
        ));
    }

    #[test]
    fn conformal_weights() {
        assert_eq!(
            ModelSurface::euclidean().conformal_weight(Point::new(7.0, 2.0)).unwrap(),
            1.0
        );
        let h = ModelSurface::hyperbolic();
        assert_eq!(h.conformal_weight(Point::ORIGIN).unwrap(), 4.0);
        assert_relative_eq!(
            h.conformal_weight(Point::new(0.5, 0.0)).unwrap(),
            4.0 / 0.5625,
            epsilon = 1e-12
        );
        assert!(h.conformal_weight(Point::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(ModelSurface::euclidean().ball_volume(1.0).unwrap(), PI);
        let h = ModelSurface::hyperbolic();
        assert_eq!(h.ball_volume(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            h.ball_volume(1.0).unwrap(),
            2.0 * PI * (1f64.cosh() - 1.0),
            epsilon = 1e-12
        );
        assert!(h.ball_volume(-0.1).is_err());
    }

    #[test]
    fn hyperbolic_ball_volume_matches_quadrature() {
        // Simpson rule for ∫₀¹ 2π sinh t dt.
        let n = 1000;
        let f = |t: f64| 2.0 * PI * t.sinh();
        let step = 1.0 / n as f64;
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * step);
        }
        let quad = acc * step / 3.0;
        assert_relative_eq!(
            ModelSurface::hyperbolic().ball_volume(1.0).unwrap(),
            quad,
            max_relative = 1e-10
        );
        assert_relative_eq!(quad, 3.41229, max_relative = 1e-5);
    }

    #[test]
    fn small_hyperbolic_balls_are_flat() {
        let r = 1e-3;
        let v = ModelSurface::hyperbolic().ball_volume(r).unwrap();
        assert!((v / (PI * r * r) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn chart_radius() {
        assert_eq!(ModelSurface::euclidean().geodesic_to_chart_radius(0.7).unwrap(), 0.7);
        let h = ModelSurface::hyperbolic();
        assert_eq!(h.geodesic_to_chart_radius(0.0).unwrap(), 0.0);
        assert_relative_eq!(h.geodesic_to_chart_radius(2.0).unwrap(), 0.76159, epsilon = 1e-5);
        assert!(h.geodesic_to_chart_radius(-1.0).is_err());
    }

    #[test]
    fn off_centre_chart_ball_boundary_is_at_geodesic_radius() {
        let h = ModelSurface::hyperbolic();
        let a = Point::new(0.4, 0.3);
        let r = 0.8;
        let (c, rad) = h.chart_ball(a, r).unwrap();
        for k in 0..12 {
            let th = k as f64 * PI / 6.0;
            let p = Point::new(c.u + rad * th.cos(), c.v + rad * th.sin());
            assert_relative_eq!(h.dist(a, p).unwrap(), r, epsilon = 1e-10);
        }
    }

    #[test]
    fn automorphism_round_trip() {
        let h = ModelSurface::hyperbolic();
        let a = Point::new(-0.2, 0.6);
        let z = Point::new(0.1, 0.1);
        let w = h.to_origin(a, z).unwrap();
        let back = h.from_origin(a, w).unwrap();
        assert_relative_eq!(back.u, z.u, epsilon = 1e-14);
        assert_relative_eq!(back.v, z.v, epsilon = 1e-14);
        assert_eq!(h.to_origin(a, a).unwrap().norm(), 0.0);
    }
}
