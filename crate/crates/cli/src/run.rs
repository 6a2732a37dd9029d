//! Experiment dispatch and artifact persistence for the `simulate` command.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nvpair_sim::ensemble::{
    collect_samples, pdf_summary, sweep_drive, write_samples_csv, EnsembleConfig, PdfSummary,
};
use nvpair_sim::experiments::{
    run_alpha_sweep, run_deer_scan, run_hh_rabi_sweep, run_hh_transfer, run_ramsey_scan,
    SweepOptions, SweepResult,
};
use nvpair_sim::model::{effective_coupling, hh_matching};
use nvpair_sim::propagate::{run_readout, Mode};
use nvpair_sim::real::linspace;
use nvpair_sim::sequences::PulseSequence;
use nvpair_sim::Error as CoreError;

use crate::config::{ExperimentConfig, ModeConfig, RunConfig};
use crate::svg;

/// CLI failure classified by exit code: configuration problems exit 2,
/// numerical contract violations exit 3.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Io(_) => "io",
            RunError::Numerical(_) => "numerical",
        }
    }
}

/// Core errors surfacing after validation are numerical; argument and parse
/// problems trace back to the configuration.
fn classify(err: CoreError) -> RunError {
    match err {
        CoreError::InvalidArgument(_) | CoreError::Parse { .. } => {
            RunError::Config(err.to_string())
        }
        CoreError::ContractViolation(_) | CoreError::Numerical(_) => {
            RunError::Numerical(err.to_string())
        }
    }
}

pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub summary: serde_json::Value,
}

fn timestamp_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn extracted_json(result: &SweepResult<f64>) -> Vec<serde_json::Value> {
    result
        .extracted
        .iter()
        .map(|e| {
            serde_json::json!({
                "name": e.name, "value": e.value, "sigma": e.sigma, "unit": e.unit,
            })
        })
        .collect()
}

fn pdf_json(name: &str, s: &PdfSummary<f64>) -> serde_json::Value {
    serde_json::json!({
        "name": name,
        "peak_mhz": s.peak,
        "fwhm_mhz": s.fwhm,
        "n_samples": s.n_samples,
        "clipped": s.clipped,
    })
}

/// Execute one configured run and persist `signal.csv`, `summary.json` and
/// optionally `plot.svg` under `out_dir`.
pub fn execute(cfg: &RunConfig, out_dir: &Path, plot: bool) -> Result<RunArtifacts, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let params = cfg.system.to_params().map_err(|e| RunError::Config(e.to_string()))?;
    let mode = match cfg.mode {
        ModeConfig::Rwa => Mode::Rwa,
        ModeConfig::Lab => Mode::Lab { step: None },
    };
    let opts = SweepOptions { mode, shots: cfg.shots, seed: cfg.seed, apply_t2star: cfg.apply_t2star };
    fs::create_dir_all(out_dir)?;

    let mut criteria: Vec<serde_json::Value> = vec![serde_json::json!({
        "name": "config_valid", "passed": true, "detail": "schema and preconditions checked"
    })];
    let mut extracted: Vec<serde_json::Value> = Vec::new();
    let mut fits = serde_json::Value::Null;

    match &cfg.experiment {
        ExperimentConfig::Deer { basis, tau_start_us, tau_stop_us, n_points } => {
            let grid = linspace(*tau_start_us, *tau_stop_us, *n_points);
            let res = run_deer_scan(&params, basis.to_basis(), &grid, &opts).map_err(classify)?;
            persist_sweep(&res, out_dir, plot)?;
            extracted = extracted_json(&res);
            fits = res.summary_json();
            push_outcome(&mut criteria, &res);
        }
        ExperimentConfig::Ramsey {
            basis, prep_b, reference_offset_mhz, tau_start_us, tau_stop_us, n_points,
        } => {
            let prep = prep_b.to_prep().map_err(RunError::Config)?;
            let grid = linspace(*tau_start_us, *tau_stop_us, *n_points);
            let res = run_ramsey_scan(
                &params, basis.to_basis(), prep, &grid, *reference_offset_mhz, &opts,
            )
            .map_err(classify)?;
            persist_sweep(&res, out_dir, plot)?;
            extracted = extracted_json(&res);
            fits = res.summary_json();
            push_outcome(&mut criteria, &res);
        }
        ExperimentConfig::AlphaSweep {
            n_alpha, omega_scale_mhz, reference_offset_mhz, tau_start_us, tau_stop_us, n_points,
        } => {
            let alphas = linspace(-1.0, 1.0, *n_alpha);
            let taus = linspace(*tau_start_us, *tau_stop_us, *n_points);
            let res = run_alpha_sweep(
                &params, &alphas, *omega_scale_mhz, &taus, *reference_offset_mhz, &opts,
            )
            .map_err(classify)?;
            persist_sweep(&res, out_dir, plot)?;
            extracted = extracted_json(&res);
            fits = res.summary_json();
            push_outcome(&mut criteria, &res);
        }
        ExperimentConfig::HhSweep {
            drive_b, omega_a_start_mhz, omega_a_stop_mhz, n_points, tau_us,
        } => {
            let tau = match tau_us {
                Some(t) => *t,
                None => {
                    let nu_eff =
                        effective_coupling(drive_b[0], drive_b[1], params.nu_dip)
                            .map_err(classify)?
                            .abs();
                    if nu_eff <= 0.0 {
                        return Err(RunError::Config(
                            "experiment.tau_us is required when the effective coupling \
                             vanishes at this drive"
                                .into(),
                        ));
                    }
                    1.0 / (2.0 * nu_eff)
                }
            };
            let grid = linspace(*omega_a_start_mhz, *omega_a_stop_mhz, *n_points);
            let res = run_hh_rabi_sweep(&params, &grid, (drive_b[0], drive_b[1]), tau, &opts)
                .map_err(classify)?;
            persist_sweep(&res, out_dir, plot)?;
            extracted = extracted_json(&res);
            fits = res.summary_json();
            push_outcome(&mut criteria, &res);
        }
        ExperimentConfig::HhTransfer { drive_b, omega_a_mhz, tau_stop_us, n_points } => {
            let omega_a = match omega_a_mhz {
                Some(o) => *o,
                None => hh_matching(drive_b[0], drive_b[1]).map_err(classify)?,
            };
            let grid = linspace(0.0, *tau_stop_us, *n_points);
            let res = run_hh_transfer(&params, omega_a, (drive_b[0], drive_b[1]), &grid, &opts)
                .map_err(classify)?;
            persist_sweep(&res, out_dir, plot)?;
            extracted = extracted_json(&res);
            fits = res.summary_json();
            push_outcome(&mut criteria, &res);
        }
        ExperimentConfig::Ensemble {
            density_ppm,
            box_edge_nm,
            cutoff_nm,
            n_configs,
            drive,
            central_class,
            n_bins,
            dump_samples,
            omega_minus_grid,
        } => {
            let base = EnsembleConfig {
                density_ppm: *density_ppm,
                box_edge_nm: *box_edge_nm,
                cutoff_nm: *cutoff_nm,
                n_configs: *n_configs,
                drive: drive.map(|d| (d[0], d[1])),
                seed: cfg.seed,
            };
            if let Some(grid) = omega_minus_grid {
                let omega_plus = drive.map(|d| d[0]).unwrap_or(10.0);
                let sweep = sweep_drive(&base, omega_plus, grid, *central_class, *n_bins)
                    .map_err(classify)?;
                let mut csv = Vec::new();
                sweep.write_csv(&mut csv)?;
                fs::write(out_dir.join("signal.csv"), &csv)?;
                extracted.push(pdf_json("nd_delta", &sweep.nd_delta));
                extracted.push(pdf_json("nd_rdd", &sweep.nd_rdd));
                if plot {
                    let x: Vec<f64> = sweep.points.iter().map(|p| p.omega_minus).collect();
                    let series = vec![
                        (
                            "delta_peak_ratio".to_string(),
                            sweep
                                .points
                                .iter()
                                .map(|p| p.delta_peak_ratio.unwrap_or(f64::NAN))
                                .collect(),
                        ),
                        (
                            "rdd_peak_ratio".to_string(),
                            sweep
                                .points
                                .iter()
                                .map(|p| p.rdd_peak_ratio.unwrap_or(f64::NAN))
                                .collect(),
                        ),
                    ];
                    fs::write(
                        out_dir.join("plot.svg"),
                        svg::line_plot("drive sweep", "omega_minus (MHz)", &x, &series),
                    )?;
                }
            } else {
                let samples = collect_samples(&base, *central_class).map_err(classify)?;
                let delta = pdf_summary(&samples.delta, *n_bins).map_err(classify)?;
                let rdd = pdf_summary(&samples.rdd, *n_bins).map_err(classify)?;
                let mut csv = String::from("statistic,bin_lo_mhz,bin_hi_mhz,count\n");
                for (label, s) in [("delta", &delta), ("rdd", &rdd)] {
                    for (k, c) in s.counts.iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            label, s.bin_edges[k], s.bin_edges[k + 1], c
                        ));
                    }
                }
                fs::write(out_dir.join("signal.csv"), csv)?;
                if *dump_samples {
                    let mut dump = Vec::new();
                    write_samples_csv(&samples, &mut dump)?;
                    fs::write(out_dir.join("samples.csv"), dump)?;
                }
                extracted.push(pdf_json("delta", &delta));
                extracted.push(pdf_json("rdd", &rdd));
                criteria.push(serde_json::json!({
                    "name": "rdd_sampling", "passed": true,
                    "detail": format!("{} of {} configurations produced no pair sample",
                                      samples.rdd_no_sample, n_configs),
                }));
                if plot {
                    let centers: Vec<f64> = (0..delta.counts.len())
                        .map(|k| 0.5 * (delta.bin_edges[k] + delta.bin_edges[k + 1]))
                        .collect();
                    let series = vec![(
                        "delta_counts".to_string(),
                        delta.counts.iter().map(|&c| c as f64).collect(),
                    )];
                    fs::write(
                        out_dir.join("plot.svg"),
                        svg::line_plot("coupling distribution", "delta (MHz)", &centers, &series),
                    )?;
                }
            }
        }
        ExperimentConfig::Sequence { file } => {
            let text = fs::read_to_string(file)?;
            let seq: PulseSequence<f64> =
                PulseSequence::parse(&text).map_err(classify)?;
            let prob = run_readout(&params, &seq, mode).map_err(classify)?;
            fs::write(
                out_dir.join("signal.csv"),
                format!("sequence,readout_probability\n{},{}\n", seq.name, prob),
            )?;
            extracted.push(serde_json::json!({
                "name": "readout_probability", "value": prob, "sigma": 0.0, "unit": "1",
            }));
        }
    }

    let summary = serde_json::json!({
        "config": serde_json::to_value(cfg).map_err(|e| RunError::Config(e.to_string()))?,
        "extracted": extracted,
        "criteria": criteria,
        "fits": fits,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "timestamp_unix": timestamp_unix(),
    });
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| RunError::Config(e.to_string()))? + "\n",
    )?;
    Ok(RunArtifacts { out_dir: out_dir.to_path_buf(), summary })
}

fn push_outcome(criteria: &mut Vec<serde_json::Value>, res: &SweepResult<f64>) {
    let outcome = serde_json::to_value(res.outcome).unwrap_or(serde_json::Value::Null);
    criteria.push(serde_json::json!({
        "name": "sweep_outcome",
        "passed": matches!(
            res.outcome,
            nvpair_sim::experiments::Outcome::Fitted
                | nvpair_sim::experiments::Outcome::Completed
        ),
        "detail": outcome,
    }));
    for w in &res.warnings {
        criteria.push(serde_json::json!({
            "name": "warning", "passed": true, "detail": w,
        }));
    }
}

fn persist_sweep(res: &SweepResult<f64>, out_dir: &Path, plot: bool) -> Result<(), RunError> {
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    fs::write(out_dir.join("signal.csv"), &csv)?;
    if !res.spectra.is_empty() {
        let mut spec_csv = String::from("freq_mhz");
        for (name, _) in &res.spectra {
            spec_csv.push_str(&format!(",power_{name}"));
        }
        spec_csv.push('\n');
        let freqs = &res.spectra[0].1.freqs;
        for (k, f) in freqs.iter().enumerate() {
            spec_csv.push_str(&format!("{f}"));
            for (_, spec) in &res.spectra {
                spec_csv.push_str(&format!(",{}", spec.power[k]));
            }
            spec_csv.push('\n');
        }
        fs::write(out_dir.join("spectrum.csv"), spec_csv)?;
    }
    if plot {
        let series: Vec<(String, Vec<f64>)> =
            res.columns.iter().map(|(n, v)| (n.clone(), v.clone())).collect();
        fs::write(
            out_dir.join("plot.svg"),
            svg::line_plot(&res.name, &res.axis_name, &res.axis, &series),
        )?;
    }
    Ok(())
}

/// Write the machine-readable error record for a failed run.
pub fn write_error_record(out_dir: &Path, err: &RunError) {
    let record = serde_json::json!({
        "error_kind": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    if fs::create_dir_all(out_dir).is_ok() {
        let _ = fs::write(
            out_dir.join("error.json"),
            serde_json::to_string_pretty(&record).unwrap_or_default(),
        );
    }
}
