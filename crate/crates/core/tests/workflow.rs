//! Config file to solver results, through the public API only.

use iuws_core::capwidth::cap_width;
use iuws_core::elliptic::torsion;
use iuws_core::heat::survival;
use iuws_core::spectrum::principal_eigenpair;
use iuws_core::verify::{CheckKind, Suite, VerifyOptions};
use iuws_core::{corpus, RunConfig};

#[test]
fn mask_file_matches_the_analytic_domain() {
    let dir = tempfile::tempdir().unwrap();
    let analytic = r#"{
        "surface": "hyperbolic",
        "window": { "umin": -0.8, "umax": 0.8, "vmin": -0.8, "vmax": 0.8 },
        "h": 0.04,
        "domain": { "kind": "annulus", "center": { "u": 0.1, "v": 0.0 }, "inner": 0.3, "outer": 1.5 }
    }"#;
    let cfg = RunConfig::from_json(analytic).unwrap();
    let sys = cfg.build().unwrap();
    sys.write_mask(&dir.path().join("ring.pgm")).unwrap();

    let masked = analytic.replace(
        r#"{ "kind": "annulus", "center": { "u": 0.1, "v": 0.0 }, "inner": 0.3, "outer": 1.5 }"#,
        r#"{ "kind": "mask_file", "path": "ring.pgm" }"#,
    );
    let path = dir.path().join("ring.json");
    std::fs::write(&path, masked).unwrap();
    let from_mask = RunConfig::load(&path).unwrap().build().unwrap();
    assert_eq!(from_mask.nodes(), sys.nodes());

    let a = torsion(&sys, 1e-10).unwrap().sup;
    let b = torsion(&from_mask, 1e-10).unwrap().sup;
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn coarse_corpus_runs_end_to_end() {
    for cfg in corpus("standard").unwrap() {
        let cfg = cfg.with_h(0.1);
        let sys = cfg.build().unwrap();
        let v = torsion(&sys, 1e-8).unwrap();
        let eig = principal_eigenpair(&sys, 1e-6).unwrap();
        assert!(eig.lambda * v.sup >= 0.95, "{}: {}", cfg.name, eig.lambda * v.sup);
        let run = survival(&sys, &[0.1, 0.5], None).unwrap();
        let pi = run.sup_norms();
        assert!(pi[1] < pi[0] && pi[0] <= 1.0, "{}: {pi:?}", cfg.name);
        if cfg.surface().is_hyperbolic() {
            continue;
        }
        let w = cap_width(&sys, cfg.eta, cfg.rmax_or_default().unwrap(), None).unwrap();
        assert!(w.w > 0.0, "{}", cfg.name);
    }
}

#[test]
fn suite_records_every_selected_check() {
    let opts = VerifyOptions { only: vec!["mesh.".into(), "geometry.".into()], timestamps: false, ..Default::default() };
    let report = Suite::new(opts).run();
    assert!(report.pass, "{:?}", report.failures().map(|c| &c.id).collect::<Vec<_>>());
    assert_eq!(report.checks.len(), 7);
    assert!(report.checks.iter().all(|c| c.kind == CheckKind::Property && c.runtime_s.is_none()));
}
