//! Acceptance suite: one test per benchmark criterion, each printing a
//! pass/fail line per check and failing if any check or its runtime budget
//! is missed. Run with `cargo test -p nvpair-sim --test acceptance`.

use nvpair_sim::validation::{self, CriterionReport};

fn assert_report(report: CriterionReport) {
    println!("criterion {}: {}", report.id, report.name);
    for line in report.render_lines() {
        println!("{line}");
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    for check in &report.checks {
        assert!(
            check.pass,
            "criterion {} failed: {} (value {}, target {} ± {})",
            report.id, check.label, check.value, check.target, check.tol
        );
    }
    assert!(
        report.runtime <= report.runtime_limit,
        "criterion {} exceeded its runtime budget: {:.2} s > {} s",
        report.id,
        report.runtime.as_secs_f64(),
        report.runtime_limit.as_secs()
    );
}

#[test]
fn criterion_1_deer_frequencies() {
    assert_report(validation::criterion_deer().expect("criterion 1 runs"));
}

#[test]
fn criterion_2_ramsey_shifts() {
    assert_report(validation::criterion_ramsey().expect("criterion 2 runs"));
}

#[test]
fn criterion_3_alpha_sweep() {
    assert_report(validation::criterion_alpha_sweep().expect("criterion 3 runs"));
}

#[test]
fn criterion_4_hh_matching() {
    assert_report(validation::criterion_hh_matching().expect("criterion 4 runs"));
}

#[test]
fn criterion_5_transfer_rates() {
    assert_report(validation::criterion_transfer().expect("criterion 5 runs"));
}

#[test]
fn criterion_6_ensemble_scaling() {
    assert_report(validation::criterion_ensemble().expect("criterion 6 runs"));
}

#[test]
fn criterion_7_property_suite() {
    assert_report(validation::criterion_properties().expect("criterion 7 runs"));
}

#[test]
fn criterion_8_crosstalk() {
    assert_report(validation::criterion_crosstalk().expect("criterion 8 runs"));
}
