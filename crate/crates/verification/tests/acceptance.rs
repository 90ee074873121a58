//! End-to-end acceptance run over the standard corpus.
//!
//! Runs the whole verification suite once at its default resolution and
//! prints one line per acceptance criterion. Tolerances live beside each
//! check in `iuws_core::verify`; the ones restated here are the ones this
//! file applies itself.

use iuws_core::verify::{CheckKind, CheckRecord, Suite, VerifyOptions};

/// Wall-clock budget for the full suite at h = 0.02.
const SUITE_BUDGET_S: f64 = 1800.0;

const CRITERIA: [(&str, &str); 11] = [
    ("accept.torsion_spectrum_product", "λ·‖v‖∞ ≥ 0.98 on the corpus"),
    ("accept.hyperbolic_ball_torsion", "hyperbolic ball torsion vs radial oracle"),
    ("accept.hyperbolic_bottom_of_spectrum", "λ(B₈) ∈ [0.25, 0.30], decreasing in r"),
    ("accept.euclidean_disk_golden_values", "unit disk golden values"),
    ("accept.comparability_chain", "comparability chain with one constant C ≤ 30"),
    ("accept.eta_robustness", "w₀.₇ / w₀.₃ ∈ [1, 10]"),
    ("accept.survival_decay", "e^{-λt} ≤ π(t) ≤ 2e^{-t/(2‖v‖)}"),
    ("accept.width_survival_rate", "strip decay rates scale as a⁻²"),
    ("accept.monte_carlo_agreement", "walks vs PDE within 3 standard errors"),
    ("accept.heat_kernel_identities", "heat kernel symmetry, semigroup, Green"),
    ("accept.iu_criterion", "IU partial sums and ratio spread"),
];

fn line(pass: bool, label: &str, detail: &str) -> String {
    format!("[{}] {label}: {detail}", if pass { "PASS" } else { "FAIL" })
}

#[test]
fn acceptance() {
    let suite = Suite::new(VerifyOptions::default());
    let report = suite.run_with(|c: &CheckRecord| {
        eprintln!("  {} {} ({:.1}s)", if c.pass { "ok  " } else { "FAIL" }, c.id, c.runtime_s.unwrap_or(0.0));
    });

    let mut failed = Vec::new();
    for (id, label) in CRITERIA {
        let rec = report.get(id).unwrap_or_else(|| panic!("missing check {id}"));
        println!("{}", line(rec.pass, label, &rec.detail));
        if !rec.pass {
            failed.push(id.to_string());
        }
    }

    let props: Vec<&CheckRecord> = report.checks.iter().filter(|c| c.kind == CheckKind::Property).collect();
    let bad: Vec<&str> = props.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    let total = report.runtime_s.unwrap_or(f64::INFINITY);
    let ok = bad.is_empty() && total <= SUITE_BUDGET_S;
    println!(
        "{}",
        line(
            ok,
            "property suite passes within 30 min",
            &format!("{}/{} properties pass, failing {bad:?}; suite {total:.0}s", props.len() - bad.len(), props.len()),
        )
    );
    if !ok {
        failed.push("property suite".into());
    }

    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
