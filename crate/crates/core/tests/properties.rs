//! Randomized invariants of the geometry, discretization and solvers.

use iuws_core::capwidth::{cap_width_with, CapWidthOptions};
use iuws_core::elliptic::{capacity, green, torsion};
use iuws_core::heat::survival;
use iuws_core::mesh::read_mask;
use iuws_core::spectrum::{principal_eigenpair, rayleigh_quotient};
use iuws_core::{build_system, DomainSpec, ModelSurface, Point, RunConfig, Window};
use iuws_core::elliptic::ScalarField;
use proptest::prelude::*;

fn surface(hyper: bool) -> ModelSurface {
    if hyper {
        ModelSurface::hyperbolic()
    } else {
        ModelSurface::euclidean()
    }
}

/// Points well inside the unit disk so both surfaces accept them.
fn point() -> impl Strategy<Value = Point> {
    (0.0..0.9f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| Point::new(r * a.cos(), r * a.sin()))
}

fn rect(w: f64, hgt: f64) -> DomainSpec {
    DomainSpec::Rectangle { center: Point::ORIGIN, width: w, height: hgt }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_a_metric(hyper: bool, p in point(), q in point(), r in point()) {
        let s = surface(hyper);
        let (pq, qr, pr) = (s.dist(p, q).unwrap(), s.dist(q, r).unwrap(), s.dist(p, r).unwrap());
        prop_assert!(pr <= pq + qr + 1e-12 * (1.0 + pq + qr));
        prop_assert!((pq - s.dist(q, p).unwrap()).abs() <= 1e-12 * (1.0 + pq));
        prop_assert_eq!(s.dist(p, p).unwrap(), 0.0);
    }

    #[test]
    fn disk_automorphisms_are_isometries(a in point(), p in point(), q in point()) {
        let s = ModelSurface::hyperbolic();
        let d = s.dist(p, q).unwrap();
        let (pa, qa) = (s.to_origin(a, p).unwrap(), s.to_origin(a, q).unwrap());
        prop_assert!((s.dist(pa, qa).unwrap() - d).abs() <= 1e-8 * (1.0 + d));
        let back = s.from_origin(a, pa).unwrap();
        prop_assert!((back.u - p.u).abs() < 1e-10 && (back.v - p.v).abs() < 1e-10);
    }

    #[test]
    fn ball_volume_doubles_boundedly(hyper: bool, r in 0.01..1.0f64) {
        let s = surface(hyper);
        let ratio = s.ball_volume(2.0 * r).unwrap() / s.ball_volume(r).unwrap();
        // Bishop-Gromov for curvature ≥ -1.
        let cap = 4.0 * (r / 2.0).cosh().powi(2);
        prop_assert!(ratio >= 4.0 * (1.0 - 1e-12) && ratio <= cap * (1.0 + 1e-12), "{}", ratio);
    }

    #[test]
    fn chart_radius_round_trips(hyper: bool, r in 0.0..6.0f64) {
        let s = surface(hyper);
        let back = s.chart_to_geodesic_radius(s.geodesic_to_chart_radius(r).unwrap()).unwrap();
        prop_assert!((back - r).abs() <= 1e-9 * (1.0 + r));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_is_positive_semidefinite(
        hyper: bool,
        w in 0.3..1.2f64,
        hgt in 0.3..1.2f64,
        seed in any::<u64>(),
    ) {
        let sys = build_system(surface(hyper), Window::centered(0.8, 0.05).unwrap(), &rect(w, hgt)).unwrap();
        let mut state = seed | 1;
        let u: Vec<f64> = (0..sys.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2001) as f64 / 1000.0 - 1.0
            })
            .collect();
        let mut su = vec![0.0; u.len()];
        sys.apply_stiffness(&u, &mut su);
        let quad: f64 = u.iter().zip(&su).map(|(a, b)| a * b).sum();
        prop_assert!(quad >= -1e-12);
        prop_assert!((sys.energy(&u) - quad).abs() <= 1e-9 * (1.0 + quad));
    }

    #[test]
    fn torsion_is_positive_and_domain_monotone(w in 0.4..1.0f64, hgt in 0.4..1.0f64, shrink in 0.5..0.95f64) {
        let s = ModelSurface::euclidean();
        let win = Window::centered(0.6, 0.025).unwrap();
        let big = build_system(s, win, &rect(w, hgt)).unwrap();
        let small = build_system(s, win, &rect(w * shrink, hgt)).unwrap();
        let vb = torsion(&big, 1e-10).unwrap();
        let vs = torsion(&small, 1e-10).unwrap();
        prop_assert!(vb.field.min() >= 0.0);
        for i in 0..small.len() {
            let j = big.index_at(small.lattice(i)).unwrap();
            prop_assert!(vs.field.values()[i] <= vb.field.values()[j] + 1e-9);
        }
    }

    #[test]
    fn green_function_is_positive(hyper: bool, pu in -0.2..0.2f64, pv in -0.2..0.2f64) {
        let sys = build_system(surface(hyper), Window::centered(0.8, 0.05).unwrap(), &rect(1.0, 1.0)).unwrap();
        let g = green(&sys, Point::new(pu, pv), 1e-10).unwrap();
        prop_assert!(g.min() >= -1e-12);
        prop_assert!(g.max() > 0.0);
    }

    #[test]
    fn capacity_is_monotone_in_the_set(hyper: bool, r in 0.05..0.3f64, cut in -0.3..0.3f64, c in point()) {
        let s = surface(hyper);
        prop_assume!(c.norm() < 0.3);
        let win = Window::centered(1.0, 0.04).unwrap();
        let h = win.h();
        let x = Point::new((c.u / h).round() * h, (c.v / h).round() * h);
        let half = capacity(s, &win, x, r, |(k, _)| k as f64 * h <= x.u + cut * r, 1e-10);
        let Ok(half) = half else { return Ok(()) };
        let full = capacity(s, &win, x, r, |_| true, 1e-10).unwrap();
        prop_assert!(half.value <= full.value * (1.0 + 1e-8) + 1e-10);
    }

    #[test]
    fn rayleigh_quotient_bounds_the_eigenvalue(w in 0.5..1.2f64, bump in 0.0..3.0f64) {
        let sys = build_system(ModelSurface::euclidean(), Window::centered(0.8, 0.04).unwrap(), &rect(w, 0.8)).unwrap();
        let eig = principal_eigenpair(&sys, 1e-8).unwrap();
        let f = ScalarField::from_fn(&sys, |p| 1.0 + bump * p.u * p.u).unwrap();
        prop_assert!(rayleigh_quotient(&sys, &f).unwrap() >= eig.lambda * (1.0 - 1e-6));
    }

    #[test]
    fn survival_decreases_in_time(hyper: bool, w in 0.3..1.2f64) {
        let sys = build_system(surface(hyper), Window::centered(0.8, 0.05).unwrap(), &rect(w, 0.6)).unwrap();
        let run = survival(&sys, &[0.0, 0.02, 0.05, 0.1, 0.2], None).unwrap();
        let sup = run.sup_norms();
        prop_assert!(sup.windows(2).all(|p| p[1] <= p[0] + 1e-9), "{:?}", sup);
        let mass = run.mass_integrals();
        prop_assert!(mass.windows(2).all(|p| p[1] <= p[0] + 1e-9), "{:?}", mass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn width_is_monotone_in_eta(w in 0.3..0.8f64, e1 in 0.2..0.8f64, e2 in 0.2..0.8f64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let sys = build_system(ModelSurface::euclidean(), Window::centered(1.5, 0.05).unwrap(), &rect(w, 0.5)).unwrap();
        let opts = CapWidthOptions { max_centers: 200, ..Default::default() };
        let a = cap_width_with(&sys, lo, 0.45, &opts).unwrap();
        let b = cap_width_with(&sys, hi, 0.45, &opts).unwrap();
        prop_assert!(a.w <= b.w, "w({}) = {} > w({}) = {}", lo, a.w, hi, b.w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(
        w in 0.2..2.0f64,
        hgt in 0.2..2.0f64,
        eta in 0.05..0.95f64,
        seed in any::<u64>(),
        paths in 1000usize..200_000,
        times in prop::collection::vec(0.0..2.0f64, 0..5),
    ) {
        let text = serde_json::json!({
            "name": "random",
            "surface": "euclidean",
            "window": { "umin": -2.0, "umax": 2.0, "vmin": -2.0, "vmax": 2.0 },
            "h": 0.05,
            "domain": { "kind": "rectangle", "center": { "u": 0.0, "v": 0.0 }, "width": w, "height": hgt },
            "eta": eta,
            "seed": seed,
            "paths": paths,
            "times": times,
        })
        .to_string();
        let a = RunConfig::from_json(&text).unwrap();
        let b = RunConfig::from_json(&a.to_json().unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mask_round_trips(w in 0.2..1.5f64, hgt in 0.2..1.5f64, hyper: bool) {
        let sys = build_system(surface(hyper), Window::centered(0.9, 0.1).unwrap(), &rect(w, hgt)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.pgm");
        sys.write_mask(&path).unwrap();
        let (nu, nv, mask) = read_mask(&std::fs::read_to_string(&path).unwrap()).unwrap();
        prop_assert_eq!((nu, nv), sys.window().dims());
        prop_assert_eq!(mask, sys.interior_mask());
    }
}
