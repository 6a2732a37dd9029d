//! Sweep engines that execute the standard experiments end to end and
//! return signals plus extracted observables.
//!
//! Each grid point is an independent pure computation; sweeps evaluate
//! points in parallel and assemble results in grid order, so outputs are
//! deterministic and independent of the worker count. Optional shot noise
//! draws from a per-point stream seeded by (seed, point index), which keeps
//! that determinism.

use rayon::prelude::*;

use crate::analysis::{
    find_peak, fit_damped_cosine, fit_lorentzian, power_spectrum, FitResult, Signal, Spectrum,
    Window,
};
use crate::error::{Error, Result};
use crate::model::{
    dressed_states, effective_coupling, hh_matching, Spin, SystemParams,
};
use crate::propagate::{
    evolve_trajectory, run_readout, Mode, Observable, TwoSpinState,
};
use crate::real::{linspace, Real};
use crate::sequences::{
    make_deer, make_ramsey, make_spinlock, Basis, PrepB, ProjectorLabel, PulseSequence,
};
use crate::spinops::Level;

/// Options shared by all sweep engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions<R> {
    pub mode: Mode<R>,
    /// When set, replace each probability by a binomial estimate at this
    /// many shots.
    pub shots: Option<u64>,
    /// Seed for the shot-noise streams.
    pub seed: u64,
    /// Multiply Ramsey signals by exp(−τ/T2*) of the probe before the FFT.
    pub apply_t2star: bool,
}

impl<R: Real> Default for SweepOptions<R> {
    fn default() -> Self {
        Self { mode: Mode::Rwa, shots: None, seed: 0, apply_t2star: false }
    }
}

/// A named extracted quantity with its 1σ uncertainty.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Extracted<R> {
    pub name: String,
    pub value: R,
    pub sigma: R,
    pub unit: String,
}

/// How a sweep concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Point values computed; no single fit is central to the result.
    Completed,
    /// The central fit converged and its parameters were extracted.
    Fitted,
    /// The signal carried no oscillation to fit.
    NoOscillation,
    /// No resonance dip rose above the detection floor.
    NoDip,
}

/// Result of one parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<R> {
    pub name: String,
    pub axis_name: String,
    pub axis_unit: String,
    pub axis: Vec<R>,
    /// Per-point series, each as long as the axis.
    pub columns: Vec<(String, Vec<R>)>,
    pub extracted: Vec<Extracted<R>>,
    pub fits: Vec<(String, FitResult<R>)>,
    /// Power spectra computed along the way (Ramsey-type scans).
    pub spectra: Vec<(String, Spectrum<R>)>,
    pub outcome: Outcome,
    pub warnings: Vec<String>,
}

impl<R: Real> SweepResult<R> {
    pub fn column(&self, name: &str) -> Option<&[R]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn extracted_value(&self, name: &str) -> Option<(R, R)> {
        self.extracted.iter().find(|e| e.name == name).map(|e| (e.value, e.sigma))
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::contract("sweep axis must be strictly monotonic"));
        }
        for (name, col) in &self.columns {
            if col.len() != self.axis.len() {
                return Err(Error::contract(format!("column `{name}` length mismatch")));
            }
        }
        if self.extracted.iter().any(|e| e.sigma < R::zero()) {
            return Err(Error::contract("extracted uncertainties must be nonnegative"));
        }
        Ok(())
    }

    /// One row per grid point, `.` decimal, frequencies in MHz and times in µs.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "{}", self.axis_name)?;
        for (name, _) in &self.columns {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (i, x) in self.axis.iter().enumerate() {
            write!(w, "{}", x.as_f64())?;
            for (_, col) in &self.columns {
                write!(w, ",{}", col[i].as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// JSON summary: extracted quantities, fit parameters and covariances,
    /// outcome and warnings.
    pub fn summary_json(&self) -> serde_json::Value {
        let fits: Vec<serde_json::Value> = self
            .fits
            .iter()
            .map(|(name, fit)| {
                let params: serde_json::Map<String, serde_json::Value> = fit
                    .names
                    .iter()
                    .zip(fit.params.iter().zip(&fit.sigmas))
                    .map(|(n, (p, s))| {
                        (
                            n.to_string(),
                            serde_json::json!({ "value": p.as_f64(), "sigma": s.as_f64() }),
                        )
                    })
                    .collect();
                let cov: Vec<Vec<f64>> = fit
                    .covariance
                    .iter()
                    .map(|row| row.iter().map(|v| v.as_f64()).collect())
                    .collect();
                serde_json::json!({
                    "name": name,
                    "parameters": params,
                    "covariance": cov,
                    "residual_norm": fit.residual_norm.as_f64(),
                    "converged": fit.converged,
                    "iterations": fit.iterations,
                    "flags": fit.flags,
                })
            })
            .collect();
        let extracted: Vec<serde_json::Value> = self
            .extracted
            .iter()
            .map(|e| {
                serde_json::json!({
                    "name": e.name,
                    "value": e.value.as_f64(),
                    "sigma": e.sigma.as_f64(),
                    "unit": e.unit,
                })
            })
            .collect();
        serde_json::json!({
            "name": self.name,
            "axis": { "name": self.axis_name, "unit": self.axis_unit, "points": self.axis.len() },
            "extracted": extracted,
            "fits": fits,
            "outcome": self.outcome,
            "warnings": self.warnings,
        })
    }
}

/// Evaluate a sequence per grid point in parallel, in grid order.
fn sweep_points<R: Real>(
    params: &SystemParams<R>,
    grid: &[R],
    opts: &SweepOptions<R>,
    build: impl Fn(R) -> Result<PulseSequence<R>> + Sync,
) -> Result<Vec<R>> {
    let mode = opts.mode;
    let mut values: Vec<R> = grid
        .par_iter()
        .map(|&x| run_readout(params, &build(x)?, mode))
        .collect::<Result<Vec<R>>>()?;
    if let Some(shots) = opts.shots {
        apply_shot_noise(&mut values, shots, opts.seed)?;
    }
    Ok(values)
}

/// Replace each probability by a binomial estimate with a per-index stream.
fn apply_shot_noise<R: Real>(values: &mut [R], shots: u64, seed: u64) -> Result<()> {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    if shots == 0 {
        return Err(Error::invalid("shot count must be positive"));
    }
    for (i, v) in values.iter_mut().enumerate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let p = v.as_f64().clamp(0.0, 1.0);
        let bin = rand_distr::Binomial::new(shots, p)
            .map_err(|e| Error::invalid(format!("binomial: {e}")))?;
        let k = bin.sample(&mut rng);
        *v = R::of(k as f64 / shots as f64);
    }
    Ok(())
}

fn check_grid<R: Real>(grid: &[R]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("sweep grid needs at least two points"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep grid must be strictly ascending"));
    }
    Ok(())
}

fn peak_to_peak<R: Real>(values: &[R]) -> R {
    let max = values.iter().fold(-R::infinity(), |m, &v| m.max(v));
    let min = values.iter().fold(R::infinity(), |m, &v| m.min(v));
    max - min
}

/// Oscillation floor below which a signal counts as flat.
fn flat_floor<R: Real>() -> R {
    R::of(1e-6)
}

/// DEER scan over the echo window τ with a damped-cosine fit.
///
/// SQ scans oscillate at ν_dip/2, DQ scans at 2·ν_dip. A flat signal (for
/// instance ν_dip = 0) is reported as a no-oscillation outcome rather than
/// an error.
pub fn run_deer_scan<R: Real>(
    params: &SystemParams<R>,
    basis: Basis,
    tau_grid: &[R],
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    check_grid(tau_grid)?;
    if !(tau_grid[0] > R::zero()) {
        return Err(Error::invalid("DEER τ grid must be positive"));
    }
    let expected = match basis {
        Basis::Sq => params.nu_dip.abs() * R::of(0.5),
        Basis::Dq => params.nu_dip.abs() * R::of(2.0),
    };
    let span = *tau_grid.last().unwrap() - tau_grid[0];
    if expected > R::zero() && span * expected < R::of(2.0) {
        return Err(Error::invalid(
            "DEER τ grid must span at least two periods of the expected oscillation",
        ));
    }

    let signal = sweep_points(params, tau_grid, opts, |tau| make_deer(basis, tau))?;

    let mut result = SweepResult {
        name: match basis {
            Basis::Sq => "deer_sq".into(),
            Basis::Dq => "deer_dq".into(),
        },
        axis_name: "tau_us".into(),
        axis_unit: "us".into(),
        axis: tau_grid.to_vec(),
        columns: vec![("signal".into(), signal.clone())],
        extracted: Vec::new(),
        fits: Vec::new(),
        spectra: Vec::new(),
        outcome: Outcome::Completed,
        warnings: Vec::new(),
    };

    if peak_to_peak(&signal) < flat_floor() {
        result.outcome = Outcome::NoOscillation;
        return Ok(result);
    }
    let fit = fit_damped_cosine(tau_grid, &signal, None)?;
    if !fit.converged && fit.flags.iter().any(|f| f.contains("flat")) {
        result.outcome = Outcome::NoOscillation;
        result.fits.push(("signal".into(), fit));
        return Ok(result);
    }
    let (freq, sigma) = fit.get("freq").unwrap();
    let (decay, decay_sigma) = fit.get("decay").unwrap();
    result.extracted.push(Extracted {
        name: "oscillation_freq_mhz".into(),
        value: freq,
        sigma,
        unit: "MHz".into(),
    });
    result.extracted.push(Extracted {
        name: "decay_rate_per_us".into(),
        value: decay,
        sigma: decay_sigma,
        unit: "1/us".into(),
    });
    result.fits.push(("signal".into(), fit));
    result.outcome = Outcome::Fitted;
    result.validate()?;
    Ok(result)
}

/// Spectrum settings shared by the Ramsey-type engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseySettings<R> {
    pub window: Window,
    pub zero_pad_factor: usize,
    /// Half-width of the peak-search band around the reference peak, MHz.
    pub band_halfwidth: R,
}

impl<R: Real> RamseySettings<R> {
    pub fn for_params(params: &SystemParams<R>) -> Self {
        Self {
            window: Window::Hann,
            zero_pad_factor: 4,
            band_halfwidth: params.nu_dip.abs() * R::of(2.5) + R::of(0.05),
        }
    }
}

fn ramsey_signal<R: Real>(
    params: &SystemParams<R>,
    basis: Basis,
    prep_b: PrepB<R>,
    tau_grid: &[R],
    reference_offset: R,
    opts: &SweepOptions<R>,
) -> Result<Vec<R>> {
    let mut signal = sweep_points(params, tau_grid, opts, |tau| {
        make_ramsey(basis, prep_b, reference_offset, tau)
    })?;
    if opts.apply_t2star {
        if let Some(t2) = params.t2star(Spin::A) {
            for (v, &tau) in signal.iter_mut().zip(tau_grid) {
                let mid = R::of(0.5);
                *v = mid + (*v - mid) * (-tau / t2).exp();
            }
        }
    }
    Ok(signal)
}

fn spectrum_peak<R: Real>(
    tau_grid: &[R],
    signal: &[R],
    reference_offset: R,
    settings: &RamseySettings<R>,
) -> Result<(Spectrum<R>, R)> {
    let spec = power_spectrum(
        &Signal::new("ramsey", tau_grid.to_vec(), signal.to_vec()),
        settings.window,
        settings.zero_pad_factor,
    )?;
    let band = (
        (reference_offset - settings.band_halfwidth).max(spec.bin_width()),
        reference_offset + settings.band_halfwidth,
    );
    let peak = find_peak(&spec, band)?;
    Ok((spec, peak.freq))
}

/// Ramsey scan: probe-phase spectrum peak relative to the |0⟩-reference run.
///
/// The reference offset places the carrier peak away from zero frequency,
/// and cancels exactly in the reported shift because both runs share it.
pub fn run_ramsey_scan<R: Real>(
    params: &SystemParams<R>,
    basis: Basis,
    prep_b: PrepB<R>,
    tau_grid: &[R],
    reference_offset: R,
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    check_grid(tau_grid)?;
    let dt = Signal::new("grid", tau_grid.to_vec(), vec![R::zero(); tau_grid.len()])
        .uniform_dt()?;
    let nyquist = R::of(0.5) / dt;
    let needed = reference_offset + params.nu_dip.abs() * R::of(2.0);
    if nyquist <= needed {
        return Err(Error::invalid(format!(
            "Ramsey grid violates Nyquist: need sampling above 2×{} MHz",
            needed
        )));
    }
    let mut warnings = Vec::new();
    if let PrepB::Drive { omega_plus, omega_minus } = prep_b {
        let bar = (omega_plus * omega_plus + omega_minus * omega_minus).sqrt();
        if bar <= params.nu_dip.abs() {
            warnings.push(
                "drive amplitude does not exceed the bare coupling; the effective-coupling \
                 picture is outside its validity range"
                    .into(),
            );
        }
    }

    let settings = RamseySettings::for_params(params);
    let signal = ramsey_signal(params, basis, prep_b, tau_grid, reference_offset, opts)?;
    let reference =
        ramsey_signal(params, basis, PrepB::State(Level::Zero), tau_grid, reference_offset, opts)?;

    let (spec, peak) = spectrum_peak(tau_grid, &signal, reference_offset, &settings)?;
    let (ref_spec, ref_peak) = spectrum_peak(tau_grid, &reference, reference_offset, &settings)?;
    let resolution = spec.bin_width() * R::of(0.25);

    let name = match basis {
        Basis::Sq => "ramsey_sq",
        Basis::Dq => "ramsey_dq",
    };
    let result = SweepResult {
        name: name.into(),
        axis_name: "tau_us".into(),
        axis_unit: "us".into(),
        axis: tau_grid.to_vec(),
        columns: vec![("signal".into(), signal), ("reference_signal".into(), reference)],
        spectra: vec![("signal".into(), spec), ("reference_signal".into(), ref_spec)],
        extracted: vec![
            Extracted {
                name: "peak_freq_mhz".into(),
                value: peak,
                sigma: resolution,
                unit: "MHz".into(),
            },
            Extracted {
                name: "reference_peak_mhz".into(),
                value: ref_peak,
                sigma: resolution,
                unit: "MHz".into(),
            },
            Extracted {
                name: "shift_mhz".into(),
                value: peak - ref_peak,
                sigma: resolution * R::of(std::f64::consts::SQRT_2),
                unit: "MHz".into(),
            },
        ],
        fits: Vec::new(),
        outcome: Outcome::Completed,
        warnings,
    };
    result.validate()?;
    Ok(result)
}

/// Drive-asymmetry sweep: per α, a DQ Ramsey run against the continuously
/// driven control spin, reporting ν_eff = shift/2 next to the closed-form
/// effective coupling.
pub fn run_alpha_sweep<R: Real>(
    params: &SystemParams<R>,
    alpha_grid: &[R],
    omega_scale: R,
    tau_grid: &[R],
    reference_offset: R,
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    check_grid(alpha_grid)?;
    check_grid(tau_grid)?;
    if alpha_grid[0] < -R::one() || *alpha_grid.last().unwrap() > R::one() {
        return Err(Error::invalid("alpha grid must lie within [-1, 1]"));
    }
    if !(omega_scale > R::zero()) {
        return Err(Error::invalid("omega_scale must be positive"));
    }
    let mut warnings = Vec::new();
    if omega_scale <= params.nu_dip.abs() * R::of(4.0) {
        warnings.push(
            "omega_scale is within 4× of the bare coupling; the closed-form effective \
             coupling is only accurate for fast driving"
                .into(),
        );
    }

    let settings = RamseySettings::for_params(params);
    let reference =
        ramsey_signal(params, Basis::Dq, PrepB::State(Level::Zero), tau_grid, reference_offset, opts)?;
    let (_, ref_peak) = spectrum_peak(tau_grid, &reference, reference_offset, &settings)?;

    let columns: Vec<(R, R)> = alpha_grid
        .par_iter()
        .map(|&alpha| -> Result<(R, R)> {
            let omega_plus = omega_scale * (R::one() + alpha);
            let omega_minus = omega_scale * (R::one() - alpha);
            let prep = PrepB::Drive { omega_plus, omega_minus };
            let signal = ramsey_signal(params, Basis::Dq, prep, tau_grid, reference_offset, opts)?;
            let (_, peak) = spectrum_peak(tau_grid, &signal, reference_offset, &settings)?;
            let shift = peak - ref_peak;
            let nu_eff_measured = shift * R::of(0.5);
            let nu_eff_eq2 = effective_coupling(omega_plus, omega_minus, params.nu_dip)?;
            Ok((nu_eff_measured, nu_eff_eq2))
        })
        .collect::<Result<Vec<_>>>()?;

    let measured: Vec<R> = columns.iter().map(|c| c.0).collect();
    let closed_form: Vec<R> = columns.iter().map(|c| c.1).collect();
    let max_dev = measured
        .iter()
        .zip(&closed_form)
        .map(|(m, c)| (*m - *c).abs())
        .fold(R::zero(), R::max);

    let result = SweepResult {
        name: "alpha_sweep".into(),
        axis_name: "alpha".into(),
        axis_unit: "1".into(),
        axis: alpha_grid.to_vec(),
        columns: vec![
            ("nu_eff_measured_mhz".into(), measured),
            ("nu_eff_eq_mhz".into(), closed_form),
        ],
        extracted: vec![Extracted {
            name: "max_abs_dev_mhz".into(),
            value: max_dev,
            sigma: R::zero(),
            unit: "MHz".into(),
        }],
        fits: Vec::new(),
        spectra: Vec::new(),
        outcome: Outcome::Completed,
        warnings,
    };
    result.validate()?;
    Ok(result)
}

/// Spin-lock amplitude sweep with a custom sequence factory; the standard
/// engines delegate here. `build(omega_a)` must produce the full sequence
/// for one grid point.
pub fn run_hh_rabi_sweep_custom<R: Real>(
    params: &SystemParams<R>,
    omega_a_grid: &[R],
    build: impl Fn(R) -> Result<PulseSequence<R>> + Sync,
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    check_grid(omega_a_grid)?;
    let signal = sweep_points(params, omega_a_grid, opts, build)?;

    let mut result = SweepResult {
        name: "hh_rabi_sweep".into(),
        axis_name: "omega_a_mhz".into(),
        axis_unit: "MHz".into(),
        axis: omega_a_grid.to_vec(),
        columns: vec![("sl_coherence".into(), signal.clone())],
        extracted: Vec::new(),
        fits: Vec::new(),
        spectra: Vec::new(),
        outcome: Outcome::Completed,
        warnings: Vec::new(),
    };

    // Detection floor: the static dipolar tilt of the lock axis wobbles the
    // coherence by O((ν_dip/2Ω)²) even with no transfer channel, so only
    // dips well above that count.
    let floor = R::of(1e-2);
    if peak_to_peak(&signal) < floor {
        result.outcome = Outcome::NoDip;
        return Ok(result);
    }
    let fit = fit_lorentzian(omega_a_grid, &signal, None)?;
    if fit.value("depth").abs() < floor
        || (!fit.converged && fit.flags.iter().any(|f| f.contains("flat")))
    {
        result.outcome = Outcome::NoDip;
        result.fits.push(("sl_coherence".into(), fit));
        return Ok(result);
    }
    let (center, center_sigma) = fit.get("center").unwrap();
    let (hwhm, hwhm_sigma) = fit.get("hwhm").unwrap();
    result.extracted.push(Extracted {
        name: "dip_center_mhz".into(),
        value: center,
        sigma: center_sigma,
        unit: "MHz".into(),
    });
    result.extracted.push(Extracted {
        name: "dip_hwhm_mhz".into(),
        value: hwhm,
        sigma: hwhm_sigma,
        unit: "MHz".into(),
    });
    result.fits.push(("sl_coherence".into(), fit));
    result.outcome = Outcome::Fitted;
    result.validate()?;
    Ok(result)
}

/// Hartmann-Hahn matching scan: sweep the probe's lock amplitude at fixed
/// spin-lock duration and fit the inverted Lorentzian dip.
pub fn run_hh_rabi_sweep<R: Real>(
    params: &SystemParams<R>,
    omega_a_grid: &[R],
    drive_b: (R, R),
    tau_fixed: R,
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    run_hh_rabi_sweep_custom(
        params,
        omega_a_grid,
        |omega_a| make_spinlock(omega_a, drive_b, tau_fixed),
        opts,
    )
}

/// Polarization-transfer scan: spin-lock coherence of the probe (and the
/// receiving dressed population of the control) versus lock duration at
/// fixed amplitudes, with a damped-cosine fit of the transfer oscillation.
///
/// Runs in RWA mode via trajectory sampling; the τ grid must be uniform.
pub fn run_hh_transfer<R: Real>(
    params: &SystemParams<R>,
    omega_a: R,
    drive_b: (R, R),
    tau_grid: &[R],
    opts: &SweepOptions<R>,
) -> Result<SweepResult<R>> {
    check_grid(tau_grid)?;
    if tau_grid[0] < R::zero() {
        return Err(Error::invalid("transfer τ grid must be nonnegative"));
    }
    if !matches!(opts.mode, Mode::Rwa) {
        return Err(Error::invalid("run_hh_transfer supports RWA mode only"));
    }
    let mut warnings = Vec::new();
    let driven = drive_b.0 > R::zero() || drive_b.1 > R::zero();
    if driven {
        let matching = hh_matching(drive_b.0, drive_b.1)?;
        let mismatch = (omega_a - matching).abs() / matching;
        if mismatch > R::of(0.05) {
            warnings.push(format!(
                "lock amplitude is {}% away from the matching condition {}",
                (mismatch * R::of(100.0)),
                matching
            ));
        } else if mismatch > R::of(0.01) {
            warnings.push("lock amplitude is more than 1% off the matching condition".into());
        }
    }

    let tau_max = *tau_grid.last().unwrap();
    let seq = make_spinlock(omega_a, drive_b, tau_max.max(R::of(1e-9)))?;
    let mut traj_seq = seq.clone();
    traj_seq.final_markers.clear();

    // |+y⟩ lock projector on A.
    let lock3 = {
        let axis = crate::sequences::RotAxis {
            pauli: crate::spinops::PauliAxis::X,
            subspace: crate::sequences::Subspace::Plus,
        };
        let gen = axis.generator::<R>();
        let half = R::of(std::f64::consts::FRAC_PI_2);
        // exp(−i θ/2 σ) P0 exp(+i θ/2 σ)
        let sub_id = gen.matmul(&gen);
        let mut u = crate::spinops::ComplexMatrix::identity(3);
        let c = (half * R::of(0.5)).cos() - R::one();
        let s = (half * R::of(0.5)).sin();
        u = &u + &sub_id.scale(crate::spinops::Cpx::new(c, R::zero()));
        u = &u + &gen.scale(crate::spinops::Cpx::new(R::zero(), -s));
        let p0 = ProjectorLabel::P0.to_matrix3();
        u.matmul(&p0).matmul(&u.dagger())
    };
    let lock = crate::model::embed(Spin::A, &lock3);

    // Receiving projector on B: the upper dressed state when driven, else
    // the bare |+1⟩ population.
    let (target_name, target) = if driven {
        let pair = dressed_states(drive_b.0, drive_b.1)?;
        ("b_dressed_plus_pop".to_string(), crate::model::embed(Spin::B, &pair.plus_d.projector()))
    } else {
        (
            "b_plus1_pop".to_string(),
            crate::model::embed(Spin::B, &ProjectorLabel::PPlus1.to_matrix3()),
        )
    };

    let traj = evolve_trajectory(
        params,
        &TwoSpinState::ground(),
        &traj_seq,
        &[
            Observable { name: "sl_coherence".into(), projector: lock },
            Observable { name: target_name.clone(), projector: target },
        ],
        tau_grid,
    )?;
    let mut sl = traj.series[0].1.clone();
    let mut gain = traj.series[1].1.clone();
    if let Some(shots) = opts.shots {
        apply_shot_noise(&mut sl, shots, opts.seed)?;
        apply_shot_noise(&mut gain, shots, opts.seed ^ 0x9e37_79b9)?;
    }

    let mut result = SweepResult {
        name: "hh_transfer".into(),
        axis_name: "tau_us".into(),
        axis_unit: "us".into(),
        axis: tau_grid.to_vec(),
        columns: vec![("sl_coherence".into(), sl.clone()), (target_name, gain)],
        extracted: Vec::new(),
        fits: Vec::new(),
        spectra: Vec::new(),
        outcome: Outcome::Completed,
        warnings,
    };

    // The zero-transfer case still wobbles at O((ν_dip/2Ω)²) from the lock
    // tilt; a transfer oscillation must rise above that floor.
    let floor = R::of(1e-2);
    if peak_to_peak(&sl) < floor {
        result.outcome = Outcome::NoOscillation;
        return Ok(result);
    }
    let fit = fit_damped_cosine(tau_grid, &sl, None)?;
    if fit.value("amp").abs() < floor
        || (!fit.converged && fit.flags.iter().any(|f| f.contains("flat")))
    {
        result.outcome = Outcome::NoOscillation;
        result.fits.push(("sl_coherence".into(), fit));
        return Ok(result);
    }
    let (freq, sigma) = fit.get("freq").unwrap();
    result.extracted.push(Extracted {
        name: "transfer_freq_mhz".into(),
        value: freq,
        sigma,
        unit: "MHz".into(),
    });
    result.fits.push(("sl_coherence".into(), fit));
    result.outcome = Outcome::Fitted;
    result.validate()?;
    Ok(result)
}

/// Default τ grid for Ramsey-type scans: 0.1 µs steps out to `tau_max`.
pub fn default_ramsey_grid<R: Real>(tau_max: R, n_points: usize) -> Vec<R> {
    linspace(R::of(0.1), tau_max, n_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(nu_dip: f64) -> SystemParams<f64> {
        SystemParams::new(2870.0, 100.0, 40.0, nu_dip).unwrap()
    }

    #[test]
    fn deer_without_coupling_reports_no_oscillation() {
        let p = params(0.0);
        let grid = linspace(0.5f64, 40.0, 80);
        let res = run_deer_scan(&p, Basis::Sq, &grid, &SweepOptions::default()).unwrap();
        assert_eq!(res.outcome, Outcome::NoOscillation);
        assert!(res.extracted.is_empty());
    }

    #[test]
    fn deer_grid_must_cover_two_periods() {
        let p = params(0.25);
        let grid = linspace(0.5f64, 4.0, 16); // SQ period is 8 µs
        let err = run_deer_scan(&p, Basis::Sq, &grid, &SweepOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn ramsey_prep_zero_has_zero_shift() {
        let p = params(0.26);
        let grid = linspace(0.1f64, 60.0, 600);
        let res = run_ramsey_scan(
            &p,
            Basis::Sq,
            PrepB::State(Level::Zero),
            &grid,
            1.5,
            &SweepOptions::default(),
        )
        .unwrap();
        let (shift, _) = res.extracted_value("shift_mhz").unwrap();
        assert!(shift.abs() < 1e-9, "shift {shift}");
    }

    #[test]
    fn ramsey_nyquist_violation_rejected() {
        let p = params(0.26);
        let grid = linspace(0.1f64, 100.0, 60); // dt ≈ 1.7 µs, Nyquist ≈ 0.3 MHz
        let err = run_ramsey_scan(
            &p,
            Basis::Sq,
            PrepB::State(Level::Plus1),
            &grid,
            1.5,
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn reference_offset_cancels_in_shift() {
        let p = params(0.26);
        let grid = linspace(0.1f64, 80.0, 800);
        let opts = SweepOptions::default();
        let a =
            run_ramsey_scan(&p, Basis::Sq, PrepB::State(Level::Plus1), &grid, 1.5, &opts).unwrap();
        let b =
            run_ramsey_scan(&p, Basis::Sq, PrepB::State(Level::Plus1), &grid, 2.3, &opts).unwrap();
        let (sa, _) = a.extracted_value("shift_mhz").unwrap();
        let (sb, _) = b.extracted_value("shift_mhz").unwrap();
        assert!((sa - sb).abs() <= 2e-3, "{sa} vs {sb}");
    }

    #[test]
    fn undriven_spinlock_has_no_dip() {
        let p = params(0.26);
        let grid = linspace(6.0f64, 9.0, 31);
        let res =
            run_hh_rabi_sweep(&p, &grid, (0.0, 0.0), 3.8, &SweepOptions::default()).unwrap();
        assert_eq!(res.outcome, Outcome::NoDip);
        let sl = res.column("sl_coherence").unwrap();
        // The static dipolar tilt wobbles the lock by O((ν/2Ω)²) only.
        assert!(sl.iter().all(|&v| (v - 1.0).abs() < 5e-3));
    }

    #[test]
    fn balanced_drive_transfers_nothing() {
        let p = params(0.26);
        let grid = linspace(0.0f64, 20.0, 101);
        let res =
            run_hh_transfer(&p, 7.0_f64.hypot(7.0), (7.0, 7.0), &grid, &SweepOptions::default())
                .unwrap();
        assert_eq!(res.outcome, Outcome::NoOscillation);
        let sl = res.column("sl_coherence").unwrap();
        assert!(sl.iter().all(|&v| v > 0.999), "coherence retained");
    }

    #[test]
    fn detuned_lock_suppresses_transfer() {
        // Lock amplitude ~2 MHz off matching (≫ ν_dip): the flip-flop is
        // off-resonant and the coherence stays near 1.
        let p = params(0.26);
        let grid = linspace(0.0f64, 20.0, 201);
        let res =
            run_hh_transfer(&p, 9.5, (7.56, 0.0), &grid, &SweepOptions::default()).unwrap();
        let sl = res.column("sl_coherence").unwrap();
        let min = sl.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.98, "coherence floor {min}");
        match res.outcome {
            Outcome::NoOscillation => {}
            Outcome::Fitted => {
                let (_, fit) = &res.fits[0];
                assert!(fit.value("amp") < 0.02, "residual wobble only");
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn transfer_warns_on_mismatch() {
        let p = params(0.26);
        let grid = linspace(0.0f64, 16.0, 81);
        let res =
            run_hh_transfer(&p, 9.0, (7.56, 0.0), &grid, &SweepOptions::default()).unwrap();
        assert!(!res.warnings.is_empty());
    }

    #[test]
    fn shot_noise_is_deterministic_and_seeded() {
        let p = params(0.25);
        let grid = linspace(0.5f64, 40.0, 120);
        let opts_a = SweepOptions { shots: Some(2000), seed: 7, ..SweepOptions::default() };
        let opts_b = SweepOptions { shots: Some(2000), seed: 8, ..SweepOptions::default() };
        let a1 = run_deer_scan(&p, Basis::Sq, &grid, &opts_a).unwrap();
        let a2 = run_deer_scan(&p, Basis::Sq, &grid, &opts_a).unwrap();
        let b = run_deer_scan(&p, Basis::Sq, &grid, &opts_b).unwrap();
        assert_eq!(a1.column("signal").unwrap(), a2.column("signal").unwrap());
        assert_ne!(a1.column("signal").unwrap(), b.column("signal").unwrap());
        // Noise at 2000 shots still leaves the frequency identifiable.
        let (freq, _) = a1.extracted_value("oscillation_freq_mhz").unwrap();
        assert_relative_eq!(freq, 0.125, max_relative = 0.05);
    }

    #[test]
    fn results_are_independent_of_worker_count() {
        let p = params(0.26);
        let grid = linspace(0.1f64, 60.0, 300);
        let opts = SweepOptions { shots: Some(500), seed: 3, ..SweepOptions::default() };
        let run = || {
            run_ramsey_scan(&p, Basis::Sq, PrepB::State(Level::Plus1), &grid, 1.5, &opts).unwrap()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let several = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single, several);
    }

    #[test]
    fn csv_and_json_emission() {
        let p = params(0.25);
        let grid = linspace(0.5f64, 40.0, 100);
        let res = run_deer_scan(&p, Basis::Sq, &grid, &SweepOptions::default()).unwrap();
        let mut csv = Vec::new();
        res.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "tau_us,signal");
        assert_eq!(text.lines().count(), grid.len() + 1);

        let json = res.summary_json();
        assert_eq!(json["axis"]["points"], 100);
        assert!(json["extracted"].as_array().unwrap().len() >= 2);
        assert_eq!(json["outcome"], "fitted");
        assert!(json["fits"][0]["covariance"].as_array().unwrap().len() == 5);
    }

    #[test]
    fn t2star_envelope_applies_to_ramsey() {
        let mut p = params(0.26);
        p.t2star_a = Some(7.2);
        let grid = linspace(0.1f64, 60.0, 600);
        let opts = SweepOptions { apply_t2star: true, ..SweepOptions::default() };
        let res =
            run_ramsey_scan(&p, Basis::Sq, PrepB::State(Level::Plus1), &grid, 1.5, &opts).unwrap();
        // Envelope damps the late-time signal toward 1/2 but leaves the
        // shift in place.
        let sig = res.column("signal").unwrap();
        assert!((sig.last().unwrap() - 0.5).abs() < 0.05);
        let (shift, _) = res.extracted_value("shift_mhz").unwrap();
        assert_relative_eq!(shift, 0.26, epsilon = 0.01);
    }
}
