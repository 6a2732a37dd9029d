//! End-to-end benchmark scenarios with numeric targets and tolerances.
//!
//! Each criterion runs a complete experiment pipeline at fixed parameters,
//! compares the extracted quantities to their closed-form or reference
//! targets, and reports one pass/fail line per check. The acceptance test
//! suite asserts these reports; the command-line `reproduce-paper` command
//! renders them and their sweep artifacts to disk.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{fit_damped_cosine, fit_lorentzian};
use crate::ensemble::{collect_samples, pdf_summary, EnsembleConfig};
use crate::error::Result;
use crate::experiments::{
    run_alpha_sweep, run_deer_scan, run_hh_rabi_sweep, run_hh_rabi_sweep_custom,
    run_hh_transfer, run_ramsey_scan, SweepOptions, SweepResult,
};
use crate::model::{
    build_rwa_hamiltonian, crosstalk_bound, effective_coupling, frame_unitary, hh_matching,
    DriveSpec, Spin, SystemParams, Transition,
};
use crate::propagate::{dephase_subspace, evolve, herm_propagator_unitarity, Mode, TwoSpinState};
use crate::real::linspace;
use crate::sequences::{make_spinlock, parse_sequence, Basis, PrepB};
use crate::spinops::Level;

/// One pass/fail comparison.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckLine {
    pub label: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Result of one benchmark criterion.
#[derive(Debug)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub checks: Vec<CheckLine>,
    pub notes: Vec<String>,
    pub runtime: Duration,
    pub runtime_limit: Duration,
    /// Sweep artifacts for rendering (CSV, plots).
    pub sweeps: Vec<(String, SweepResult<f64>)>,
    /// Extra raw artifacts (file name, CSV content).
    pub artifacts: Vec<(String, String)>,
}

impl CriterionReport {
    fn new(id: usize, name: &str, limit_s: u64) -> Self {
        Self {
            id,
            name: name.into(),
            checks: Vec::new(),
            notes: Vec::new(),
            runtime: Duration::ZERO,
            runtime_limit: Duration::from_secs(limit_s),
            sweeps: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.checks.push(CheckLine { label: label.into(), value, target, tol, pass });
    }

    fn check_flag(&mut self, label: impl Into<String>, pass: bool) {
        self.checks.push(CheckLine {
            label: label.into(),
            value: if pass { 1.0 } else { 0.0 },
            target: 1.0,
            tol: 0.0,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.runtime <= self.runtime_limit
    }

    /// Render the per-check lines plus the runtime line.
    pub fn render_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "  [{}] {}: value {:.6}, target {:.6} ± {:.6}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.label,
                    c.value,
                    c.target,
                    c.tol
                )
            })
            .collect();
        out.push(format!(
            "  [{}] runtime: {:.2} s (limit {} s)",
            if self.runtime <= self.runtime_limit { "PASS" } else { "FAIL" },
            self.runtime.as_secs_f64(),
            self.runtime_limit.as_secs(),
        ));
        out
    }
}

/// The spin-pair parameters used throughout the benchmarks: zero-field
/// splitting 2870 MHz with Zeeman projections of 100 and 40 MHz, putting the
/// two |0⟩↔|+1⟩ resonances 60 MHz apart.
pub fn benchmark_params(nu_dip: f64) -> SystemParams<f64> {
    SystemParams::new(2870.0, 100.0, 40.0, nu_dip).expect("static benchmark parameters")
}

/// Criterion 1: DEER oscillation frequencies at ν_dip = 0.250 MHz.
pub fn criterion_deer() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(1, "DEER frequencies", 10);
    let start = Instant::now();
    let params = benchmark_params(0.250);
    let opts = SweepOptions::default();

    let sq_grid = linspace(0.25, 40.0, 400);
    let sq = run_deer_scan(&params, Basis::Sq, &sq_grid, &opts)?;
    let (freq_sq, _) = sq.extracted_value("oscillation_freq_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("SQ oscillation frequency (MHz)", freq_sq, 0.125, 0.125 * 0.02);

    let dq_grid = linspace(0.1, 12.0, 400);
    let dq = run_deer_scan(&params, Basis::Dq, &dq_grid, &opts)?;
    let (freq_dq, _) = dq.extracted_value("oscillation_freq_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("DQ oscillation frequency (MHz)", freq_dq, 0.500, 0.500 * 0.02);

    report.notes.push(
        "reference context: measured 0.125 ± 0.01 and 0.495 ± 0.031 MHz".into(),
    );
    report.sweeps.push(("deer_sq".into(), sq));
    report.sweeps.push(("deer_dq".into(), dq));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 2: Ramsey shifts at ν_dip = 0.26 MHz, within one interpolated
/// FFT bin (≤ 0.01 MHz at 100 µs records).
pub fn criterion_ramsey() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(2, "Ramsey shifts", 30);
    let start = Instant::now();
    let params = benchmark_params(0.26);
    let opts = SweepOptions::default();
    let grid = linspace(0.1, 100.0, 1000);
    let f_ref = 1.5;

    let cases: [(Basis, Level, f64, &str); 4] = [
        (Basis::Sq, Level::Plus1, 0.26, "SQ prep |+1⟩ shift (MHz)"),
        (Basis::Sq, Level::Minus1, -0.26, "SQ prep |−1⟩ shift (MHz)"),
        (Basis::Dq, Level::Plus1, 0.52, "DQ prep |+1⟩ shift (MHz)"),
        (Basis::Dq, Level::Minus1, -0.52, "DQ prep |−1⟩ shift (MHz)"),
    ];
    for (basis, level, target, label) in cases {
        let res = run_ramsey_scan(&params, basis, PrepB::State(level), &grid, f_ref, &opts)?;
        let (shift, _) = res.extracted_value("shift_mhz").unwrap_or((f64::NAN, 0.0));
        report.check(label, shift, target, 0.01);
        let name = format!(
            "ramsey_{}_{}",
            match basis {
                Basis::Sq => "sq",
                Basis::Dq => "dq",
            },
            match level {
                Level::Plus1 => "plus1",
                Level::Minus1 => "minus1",
                Level::Zero => "zero",
            }
        );
        report.sweeps.push((name, res));
    }
    report.notes.push("reference context: ±0.26 ± 0.02 and ±0.52 ± 0.02 MHz".into());
    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 3: drive-asymmetry sweep against the closed-form effective
/// coupling, 11 points over [−1, 1].
pub fn criterion_alpha_sweep() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(3, "effective-coupling sweep", 120);
    let start = Instant::now();
    let params = benchmark_params(0.26);
    let opts = SweepOptions::default();
    let alphas = linspace(-1.0, 1.0, 11);
    let tau_grid = linspace(0.1, 100.0, 1000);
    let res = run_alpha_sweep(&params, &alphas, 2.5, &tau_grid, 2.0, &opts)?;

    let tol = 0.05 * params.nu_dip / 2.0;
    let measured = res.column("nu_eff_measured_mhz").unwrap().to_vec();
    let closed = res.column("nu_eff_eq_mhz").unwrap().to_vec();
    let max_dev = measured
        .iter()
        .zip(&closed)
        .map(|(m, c)| (m - c).abs())
        .fold(0.0f64, f64::max);
    report.check("max |measured − closed-form| (MHz)", max_dev, 0.0, tol);
    report.check(
        "endpoint α=+1 DQ peak shift (MHz)",
        2.0 * measured[alphas.len() - 1],
        0.26,
        0.01,
    );
    report.check("endpoint α=−1 DQ peak shift (MHz)", 2.0 * measured[0], -0.26, 0.01);

    // Antisymmetry and monotonicity invariants.
    let max_asym = (0..alphas.len() / 2)
        .map(|i| (measured[i] + measured[alphas.len() - 1 - i]).abs())
        .fold(0.0f64, f64::max);
    report.check("antisymmetry residual (MHz)", max_asym, 0.0, tol);
    let monotone = measured.windows(2).all(|w| w[1] > w[0]);
    report.check_flag("monotone in α", monotone);

    report.sweeps.push(("alpha_sweep".into(), res));
    report.runtime = start.elapsed();
    Ok(report)
}

fn dip_scan_grids() -> (Vec<f64>, f64, Vec<f64>, f64) {
    let shh_grid = linspace(6.0, 9.0, 61);
    let nu_eff_shh = 0.13;
    let tau_shh = 1.0 / (2.0 * nu_eff_shh);
    let dhh_grid = linspace(9.0, 12.0, 61);
    let nu_eff_dhh = effective_coupling(9.59, 4.13, 0.26).expect("nonzero drive");
    let tau_dhh = 1.0 / (2.0 * nu_eff_dhh);
    (shh_grid, tau_shh, dhh_grid, tau_dhh)
}

/// Criterion 4: Hartmann-Hahn dip centers at the matching conditions.
pub fn criterion_hh_matching() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(4, "Hartmann-Hahn matching", 120);
    let start = Instant::now();
    let params = benchmark_params(0.26);
    let opts = SweepOptions::default();
    let (shh_grid, tau_shh, dhh_grid, tau_dhh) = dip_scan_grids();

    let shh = run_hh_rabi_sweep(&params, &shh_grid, (7.56, 0.0), tau_shh, &opts)?;
    let (center, _) = shh.extracted_value("dip_center_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("single-drive dip center (MHz)", center, 7.56, 0.05);

    let dhh = run_hh_rabi_sweep(&params, &dhh_grid, (9.59, 4.13), tau_dhh, &opts)?;
    let (center, _) = dhh.extracted_value("dip_center_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("double-drive dip center (MHz)", center, 10.44, 0.05);

    report
        .notes
        .push("reference context: measured 7.66 ± 0.1 and 10.51 ± 0.1 MHz under drift".into());
    report.sweeps.push(("hh_dip_shh".into(), shh));
    report.sweeps.push(("hh_dip_dhh".into(), dhh));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 5: polarization-transfer rates and the double/single ratio.
pub fn criterion_transfer() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(5, "transfer rates", 120);
    let start = Instant::now();
    let params = benchmark_params(0.26);
    let opts = SweepOptions::default();

    let shh_tau = linspace(0.0, 20.0, 201);
    let shh = run_hh_transfer(&params, 7.56, (7.56, 0.0), &shh_tau, &opts)?;
    let (f_shh, _) = shh.extracted_value("transfer_freq_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("single-drive transfer frequency (MHz)", f_shh, 0.130, 0.013);

    let matching = hh_matching(9.59, 4.13)?;
    let dhh_tau = linspace(0.0, 30.0, 301);
    let dhh = run_hh_transfer(&params, matching, (9.59, 4.13), &dhh_tau, &opts)?;
    let (f_dhh, _) = dhh.extracted_value("transfer_freq_mhz").unwrap_or((f64::NAN, 0.0));
    report.check("double/single frequency ratio", f_dhh / f_shh, 0.687, 0.05);

    // Energy-conservation proxy at the first transfer extremum.
    let sl = shh.column("sl_coherence").unwrap();
    let gain = shh.column("b_dressed_plus_pop").unwrap();
    let half_period = 1.0 / (2.0 * f_shh);
    let idx = shh_tau
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - half_period).abs().partial_cmp(&(b.1 - half_period).abs()).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let loss = 1.0 - sl[idx];
    let gained = gain[idx] - gain[0];
    report.check(
        "probe loss vs receiver gain at the first extremum",
        gained / loss.max(1e-12),
        1.0,
        0.05,
    );

    report.notes.push("reference context: measured 119 ± 10 kHz and 73 ± 10 kHz".into());
    report.sweeps.push(("hh_transfer_shh".into(), shh));
    report.sweeps.push(("hh_transfer_dhh".into(), dhh));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 6: ensemble Monte Carlo scaling ratios at 50 ppm.
pub fn criterion_ensemble() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(6, "ensemble scaling", 300);
    let start = Instant::now();
    let base = EnsembleConfig {
        density_ppm: 50.0,
        box_edge_nm: 50.0,
        cutoff_nm: 15.0,
        n_configs: 2000,
        drive: None,
        seed: 0x5EED_2026,
    };
    let nd = collect_samples(&base, 0)?;
    let nd_delta = pdf_summary(&nd.delta, 60)?;
    let nd_rdd = pdf_summary(&nd.rdd, 60)?;

    let mut runs = Vec::new();
    let cases: [((f64, f64), &str); 2] = [
        ((10.0, 8.0), "doubly driven (10, 8)"),
        ((10.0, 0.0), "singly driven (10, 0)"),
    ];
    for (drive, label) in cases {
        let mut cfg = base.clone();
        cfg.drive = Some(drive);
        let s = collect_samples(&cfg, 0)?;
        let delta = pdf_summary(&s.delta, 60)?;
        let rdd = pdf_summary(&s.rdd, 60)?;
        let tol = if drive.1 > 0.0 { 0.02 } else { 0.05 };
        let nominal = if drive.1 > 0.0 { 0.110 } else { 0.50 };
        report.check(
            format!("{label} Δ peak ratio"),
            delta.peak.unwrap_or(f64::NAN) / nd_delta.peak.unwrap_or(f64::NAN),
            nominal,
            tol,
        );
        report.check(
            format!("{label} Δ FWHM ratio"),
            delta.fwhm.unwrap_or(f64::NAN) / nd_delta.fwhm.unwrap_or(f64::NAN),
            nominal,
            tol,
        );
        report.check(
            format!("{label} R_dd peak ratio"),
            rdd.peak.unwrap_or(f64::NAN) / nd_rdd.peak.unwrap_or(f64::NAN),
            nominal,
            tol,
        );
        report.check(
            format!("{label} R_dd FWHM ratio"),
            rdd.fwhm.unwrap_or(f64::NAN) / nd_rdd.fwhm.unwrap_or(f64::NAN),
            nominal,
            tol,
        );
        runs.push((label, s, delta, rdd));
    }

    report.notes.push(format!(
        "not-driven Δ peak {:.3} MHz, FWHM {:.3} MHz over {} configurations",
        nd_delta.peak.unwrap_or(f64::NAN),
        nd_delta.fwhm.unwrap_or(f64::NAN),
        base.n_configs
    ));
    report.notes.push(
        "reference context: Δ peak 48 ± 10 kHz (driven) vs 390 kHz (not driven)".into(),
    );

    // Histogram artifact for external plotting.
    let mut csv = String::from("statistic,drive,bin_lo_mhz,bin_hi_mhz,count\n");
    let mut emit = |stat: &str, drive: &str, s: &crate::ensemble::PdfSummary<f64>| {
        for (k, c) in s.counts.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                stat, drive, s.bin_edges[k], s.bin_edges[k + 1], c
            ));
        }
    };
    emit("delta", "none", &nd_delta);
    emit("rdd", "none", &nd_rdd);
    for (label, _, delta, rdd) in &runs {
        emit("delta", label, delta);
        emit("rdd", label, rdd);
    }
    report.artifacts.push(("ensemble_histograms.csv".into(), csv));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 7: property suite. Invariants over randomized sequences,
/// lab-frame validation of the rotating frame, closed-form properties, and
/// fit oracles.
pub fn criterion_properties() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(7, "property suite", 300);
    let start = Instant::now();
    let params = benchmark_params(0.26);

    // (a) Unitarity / trace / positivity over 1000 randomized sequences.
    let mut rng = ChaCha8Rng::seed_from_u64(0x0BAD_5EED);
    let mut worst_unitarity = 0.0f64;
    let mut state_failures = 0usize;
    for _ in 0..1000 {
        let n_segs = rng.random_range(1..=4);
        let mut text = String::new();
        text.push_str("prep A |0>\nrot A x+ 0.7853981633974483\n");
        for _ in 0..n_segs {
            let dur: f64 = rng.random_range(0.01..0.6);
            if rng.random_bool(0.3) {
                text.push_str(&format!("wait {dur}\n"));
                continue;
            }
            text.push_str(&format!("segment {dur}\n"));
            let mut used = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let spin = if rng.random_bool(0.5) { "A" } else { "B" };
                let tr = if rng.random_bool(0.5) { "plus" } else { "minus" };
                if used.contains(&(spin, tr)) {
                    continue;
                }
                used.push((spin, tr));
                text.push_str(&format!(
                    "  drive {spin} {tr} {} det {} phase {}\n",
                    rng.random_range(0.0..10.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.0..std::f64::consts::TAU)
                ));
            }
            text.push_str("end\n");
            if rng.random_bool(0.2) {
                text.push_str("rot B x- 1.5707963267948966\n");
            }
        }
        text.push_str("read A P0\n");
        let seq = parse_sequence::<f64>(&text)?;

        for seg in &seq.segments {
            if seg.duration <= 0.0 {
                continue;
            }
            let h = build_rwa_hamiltonian(&params, &seg.drives)?;
            worst_unitarity = worst_unitarity.max(herm_propagator_unitarity(&h, seg.duration)?);
        }
        let pure = evolve(&params, &TwoSpinState::ground(), &seq, Mode::Rwa)?;
        let mixed0 = dephase_subspace(
            &TwoSpinState::ground(),
            Spin::B,
            (Level::Zero, Level::Plus1),
        );
        let dens = evolve(&params, &mixed0, &seq, Mode::Rwa)?;
        if pure.validate().is_err() || dens.validate().is_err() {
            state_failures += 1;
        }
    }
    report.check("worst propagator unitarity error", worst_unitarity, 0.0, 1e-10);
    report.check_flag(
        "norm/trace/positivity preserved over 1000 randomized sequences",
        state_failures == 0,
    );

    // (b) Lab-frame validation of the rotating frame on five scenarios.
    let scenarios: [(&str, Vec<DriveSpec<f64>>, f64); 5] = [
        (
            "probe driven at 10 MHz",
            vec![DriveSpec::resonant(Spin::A, Transition::Plus, 10.0)],
            2.0 / 10.0,
        ),
        (
            "control driven at 7.56 MHz",
            vec![DriveSpec::resonant(Spin::B, Transition::Plus, 7.56)],
            2.0 / 7.56,
        ),
        (
            "control doubly driven (9.59, 4.13)",
            vec![
                DriveSpec::resonant(Spin::B, Transition::Plus, 9.59),
                DriveSpec::resonant(Spin::B, Transition::Minus, 4.13),
            ],
            2.0 / 10.44,
        ),
        (
            "both spins driven at the double-drive matching point",
            vec![
                DriveSpec::resonant(Spin::A, Transition::Plus, 10.44)
                    .with_phase(std::f64::consts::FRAC_PI_2),
                DriveSpec::resonant(Spin::B, Transition::Plus, 9.59),
                DriveSpec::resonant(Spin::B, Transition::Minus, 4.13),
            ],
            2.0 / 10.44,
        ),
        (
            "detuned drives on both spins",
            vec![
                DriveSpec::resonant(Spin::A, Transition::Plus, 5.0).with_detuning(1.0),
                DriveSpec::resonant(Spin::B, Transition::Minus, 5.0).with_detuning(-0.5),
            ],
            2.0 / 5.0,
        ),
    ];
    for (label, drives, tau) in scenarios {
        let mut text = format!("segment {tau}\n");
        for d in &drives {
            text.push_str(&format!(
                "  drive {} {} {} det {} phase {}\n",
                d.spin.label(),
                d.transition.label(),
                d.rabi,
                d.detuning,
                d.phase
            ));
        }
        text.push_str("end\nread A P0\n");
        let seq = parse_sequence::<f64>(&text)?;
        let rwa = evolve(&params, &TwoSpinState::ground(), &seq, Mode::Rwa)?;
        let lab = evolve(&params, &TwoSpinState::ground(), &seq, Mode::Lab { step: None })?;
        let w = frame_unitary(&params, &drives, tau);
        let mut rwa_in_lab = rwa.clone();
        rwa_in_lab.apply_unitary(&w);
        let fid = lab.fidelity(&rwa_in_lab)?;
        report.check(format!("lab/RWA fidelity: {label}"), fid, 1.0, 0.01);
    }

    // (c) Closed-form effective-coupling properties over 10⁴ random triples.
    let mut rng = ChaCha8Rng::seed_from_u64(0xE9_2026);
    let mut worst_asym = 0.0f64;
    let mut worst_scale = 0.0f64;
    let mut bound_violations = 0usize;
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(0.0..20.0);
        let b: f64 = rng.random_range(0.0..20.0);
        if a + b < 1e-9 {
            continue;
        }
        let nu: f64 = rng.random_range(-1.0..1.0);
        let s: f64 = rng.random_range(1e-3..1e3);
        let v = effective_coupling(a, b, nu)?;
        worst_asym = worst_asym.max((v + effective_coupling(b, a, nu)?).abs());
        worst_scale = worst_scale.max((v - effective_coupling(s * a, s * b, nu)?).abs());
        if v.abs() > nu.abs() / 2.0 + 1e-15 {
            bound_violations += 1;
        }
    }
    report.check("effective-coupling antisymmetry residual", worst_asym, 0.0, 1e-15);
    report.check("effective-coupling scale-invariance residual", worst_scale, 0.0, 1e-12);
    report.check_flag("effective coupling bounded by |ν_dip|/2", bound_violations == 0);

    // (d) Fit oracles: exact synthetic recovery to 1e-6.
    let x = linspace(6.0, 9.0, 61);
    let truth_l = [7.56, 0.13, 0.5, 1.0];
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let u = (xi - truth_l[0]) / truth_l[1];
            truth_l[3] - truth_l[2] / (1.0 + u * u)
        })
        .collect();
    let fit = fit_lorentzian(&x, &y, None)?;
    let worst_l = fit
        .params
        .iter()
        .zip(&truth_l)
        .map(|(p, t)| ((p - t) / t).abs())
        .fold(0.0f64, f64::max);
    report.check("Lorentzian synthetic recovery (rel. error)", worst_l, 0.0, 1e-6);

    let t = linspace(0.0, 40.0, 401);
    let truth_c = [0.125, 0.05, 0.5, 0.5];
    let yc: Vec<f64> = t
        .iter()
        .map(|&ti| {
            truth_c[3]
                + truth_c[2]
                    * (std::f64::consts::TAU * truth_c[0] * ti).cos()
                    * (-truth_c[1] * ti).exp()
        })
        .collect();
    let fitc = fit_damped_cosine(&t, &yc, None)?;
    let worst_c = ["freq", "decay", "amp", "offset"]
        .iter()
        .zip(&truth_c)
        .map(|(name, t)| ((fitc.value(name) - t) / t).abs())
        .fold(0.0f64, f64::max);
    report.check("damped-cosine synthetic recovery (rel. error)", worst_c, 0.0, 1e-6);

    report.runtime = start.elapsed();
    Ok(report)
}

/// Criterion 8: cross-talk bound and its full-dynamics realization: the
/// double-drive dip center moves by less than 0.05 MHz when the probe's
/// drive tone is additionally applied to the control 60 MHz off resonance.
pub fn criterion_crosstalk() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(8, "cross-talk", 120);
    let start = Instant::now();
    let params = benchmark_params(0.26);
    let opts = SweepOptions::default();

    report.check("closed-form bound (Ω/Δ)² at (10.44, 60)", crosstalk_bound(10.44, 60.0)?, 0.030, 0.001);

    // Narrow scan around the double-drive matching point.
    let grid = linspace(10.2, 10.7, 21);
    let nu_eff = effective_coupling(9.59, 4.13, 0.26)?;
    let tau = 1.0 / (2.0 * nu_eff);
    let clean = run_hh_rabi_sweep(&params, &grid, (9.59, 4.13), tau, &opts)?;
    let (clean_center, _) = clean.extracted_value("dip_center_mhz").unwrap_or((f64::NAN, 0.0));

    // The probe's spin-lock tone sits 60 MHz above the control's |0⟩↔|+1⟩
    // resonance and leaks onto it with the probe's own amplitude.
    let leaked = run_hh_rabi_sweep_custom(
        &params,
        &grid,
        |omega_a| {
            let mut seq = make_spinlock(omega_a, (9.59, 4.13), tau)?;
            seq.segments[0].drives.push(
                DriveSpec::resonant(Spin::B, Transition::Plus, omega_a)
                    .with_detuning(60.0)
                    .with_phase(std::f64::consts::FRAC_PI_2),
            );
            Ok(seq)
        },
        &opts,
    )?;
    let (leaked_center, _) = leaked.extracted_value("dip_center_mhz").unwrap_or((f64::NAN, 0.0));
    report.check(
        "dip-center shift under 60 MHz cross-talk (MHz)",
        leaked_center - clean_center,
        0.0,
        0.05,
    );

    report.sweeps.push(("crosstalk_clean".into(), clean));
    report.sweeps.push(("crosstalk_leaked".into(), leaked));
    report.runtime = start.elapsed();
    Ok(report)
}

/// Run all benchmark criteria in order.
pub fn run_all() -> Result<Vec<CriterionReport>> {
    Ok(vec![
        criterion_deer()?,
        criterion_ramsey()?,
        criterion_alpha_sweep()?,
        criterion_hh_matching()?,
        criterion_transfer()?,
        criterion_ensemble()?,
        criterion_properties()?,
        criterion_crosstalk()?,
    ])
}
