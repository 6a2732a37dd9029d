//! Markdown report and artifact emission for the batch benchmark run.

use std::fs;
use std::path::Path;

use nvpair_sim::validation::{run_all, CriterionReport};

use crate::run::RunError;
use crate::svg;

/// Run every benchmark criterion, write `report.md` plus per-criterion CSV
/// and SVG artifacts under `out_dir`, and return whether all passed.
pub fn reproduce(out_dir: &Path) -> Result<bool, RunError> {
    fs::create_dir_all(out_dir)?;
    let reports = run_all().map_err(|e| RunError::Numerical(e.to_string()))?;
    let all_passed = reports.iter().all(|r| r.passed());

    let mut md = String::new();
    md.push_str("# Benchmark reproduction report\n\n");
    md.push_str(&format!(
        "Simulator version {}. Each criterion compares simulator output to its \
         closed-form or reference target at the stated tolerance; measured values \
         from the reference experiment are quoted as context in the notes.\n\n",
        env!("CARGO_PKG_VERSION")
    ));
    md.push_str(&format!(
        "**Result: {}/{} criteria passed.**\n\n",
        reports.iter().filter(|r| r.passed()).count(),
        reports.len()
    ));

    for report in &reports {
        write_criterion(&mut md, report, out_dir)?;
    }
    fs::write(out_dir.join("report.md"), md)?;
    Ok(all_passed)
}

fn write_criterion(md: &mut String, report: &CriterionReport, out_dir: &Path) -> Result<(), RunError> {
    let status = if report.passed() { "PASS" } else { "FAIL" };
    md.push_str(&format!("## Criterion {}: {} [{}]\n\n", report.id, report.name, status));
    md.push_str(&format!(
        "Runtime {:.2} s (limit {} s).\n\n",
        report.runtime.as_secs_f64(),
        report.runtime_limit.as_secs()
    ));
    md.push_str("| check | value | target | tolerance | status |\n");
    md.push_str("|---|---|---|---|---|\n");
    for c in &report.checks {
        md.push_str(&format!(
            "| {} | {:.6} | {:.6} | {:.6} | {} |\n",
            c.label,
            c.value,
            c.target,
            c.tol,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    md.push('\n');
    for note in &report.notes {
        md.push_str(&format!("- {note}\n"));
    }

    let dir = out_dir.join(format!("criterion_{}", report.id));
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for (name, sweep) in &report.sweeps {
        let mut csv = Vec::new();
        sweep.write_csv(&mut csv)?;
        let csv_name = format!("{name}.csv");
        fs::write(dir.join(&csv_name), &csv)?;
        files.push(csv_name);

        let series: Vec<(String, Vec<f64>)> =
            sweep.columns.iter().map(|(n, v)| (n.clone(), v.clone())).collect();
        let svg_name = format!("{name}.svg");
        fs::write(
            dir.join(&svg_name),
            svg::line_plot(&sweep.name, &sweep.axis_name, &sweep.axis, &series),
        )?;
        files.push(svg_name);
    }
    for (name, content) in &report.artifacts {
        fs::write(dir.join(name), content)?;
        files.push(name.clone());
    }
    if !files.is_empty() {
        md.push_str(&format!(
            "\nArtifacts in `criterion_{}/`: {}\n",
            report.id,
            files.join(", ")
        ));
    }
    md.push('\n');
    Ok(())
}
