//! Semi-classical Monte Carlo over random defect lattices: Poisson-sampled
//! spin positions on four crystalline axis classes, secular dipolar
//! couplings, dressed-state rescaling of each coupling, and the statistics
//! of the central-spin coupling Δ and the strongest pairwise coupling R_dd.
//!
//! Configurations are independent tasks with per-task RNG streams derived
//! from (seed, configuration index), so results are identical regardless of
//! scheduling or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::effective_coupling;
use crate::real::Real;

/// Carbon site density of diamond per ppm of defect concentration,
/// sites/nm³ (1.76e23 cm⁻³ total carbon density).
pub const SITES_PER_NM3_PER_PPM: f64 = 1.76e-4;

/// Electron-electron dipolar constant J₀, MHz·nm³: (μ₀/4π)·g²μ_B²/h.
pub const DIPOLAR_CONSTANT_MHZ_NM3: f64 = 52.0;

/// The four ⟨111⟩ crystalline axis directions, unnormalized.
const AXES: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Unit vector of one axis class.
pub fn axis_vector<R: Real>(class: usize) -> [R; 3] {
    let a = AXES[class];
    let inv = R::of(1.0 / (3.0f64).sqrt());
    [R::of(a[0]) * inv, R::of(a[1]) * inv, R::of(a[2]) * inv]
}

/// Monte Carlo configuration parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleConfig<R> {
    /// Defect concentration, ppm of carbon sites.
    pub density_ppm: R,
    /// Simulation box edge, nm.
    pub box_edge_nm: R,
    /// Interaction cutoff radius, nm.
    pub cutoff_nm: R,
    /// Number of lattice configurations.
    pub n_configs: usize,
    /// (Ω₊, Ω₋) in MHz applied to the driven (off-axis) classes; None means
    /// not driven, i.e. bare couplings.
    pub drive: Option<(R, R)>,
    pub seed: u64,
}

impl<R: Real> EnsembleConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.density_ppm > R::zero()) {
            return Err(Error::invalid("density_ppm must be positive"));
        }
        if !(self.box_edge_nm > self.cutoff_nm * R::of(2.0)) {
            return Err(Error::invalid("box edge must exceed twice the cutoff radius"));
        }
        if self.n_configs < 1 {
            return Err(Error::invalid("n_configs must be at least 1"));
        }
        if let Some((op, om)) = self.drive {
            if !(op >= R::zero() && om >= R::zero()) || (op.is_zero() && om.is_zero()) {
                return Err(Error::invalid(
                    "ensemble drive amplitudes must be nonnegative and not both zero",
                ));
            }
        }
        Ok(())
    }

    /// Expected number of sites in the box.
    pub fn mean_count(&self) -> R {
        let volume = self.box_edge_nm * self.box_edge_nm * self.box_edge_nm;
        self.density_ppm * R::of(SITES_PER_NM3_PER_PPM) * volume
    }
}

/// One defect site: position and crystalline axis class (0..4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSite<R> {
    pub position: [R; 3],
    pub axis_class: usize,
}

/// Poisson point process in the box with uniformly random axis classes.
/// Deterministic given (cfg.seed, config_index).
pub fn sample_configuration<R: Real>(
    cfg: &EnsembleConfig<R>,
    config_index: u64,
) -> Vec<SpinSite<R>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(config_index.wrapping_add(1));
    let poisson = rand_distr::Poisson::new(cfg.mean_count().as_f64())
        .expect("validated ensemble density");
    let n = poisson.sample(&mut rng) as usize;
    let edge = cfg.box_edge_nm.as_f64();
    (0..n)
        .map(|_| {
            let position = [
                R::of(rng.random_range(0.0..edge)),
                R::of(rng.random_range(0.0..edge)),
                R::of(rng.random_range(0.0..edge)),
            ];
            let axis_class = rng.random_range(0..4usize);
            SpinSite { position, axis_class }
        })
        .collect()
}

fn dot<R: Real>(a: &[R; 3], b: &[R; 3]) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Secular zz dipolar coefficient between two sites, MHz:
/// ν = (J₀/r³)·[ẑᵢ·ẑⱼ − 3 (ẑᵢ·r̂)(ẑⱼ·r̂)], symmetric in its arguments.
pub fn pairwise_coupling<R: Real>(a: &SpinSite<R>, b: &SpinSite<R>) -> Result<R> {
    let sep = [
        b.position[0] - a.position[0],
        b.position[1] - a.position[1],
        b.position[2] - a.position[2],
    ];
    let r2 = dot(&sep, &sep);
    if r2.is_zero() {
        return Err(Error::invalid("pairwise_coupling requires distinct positions"));
    }
    let r = r2.sqrt();
    let rhat = [sep[0] / r, sep[1] / r, sep[2] / r];
    let za = axis_vector::<R>(a.axis_class);
    let zb = axis_vector::<R>(b.axis_class);
    let angular = dot(&za, &zb) - R::of(3.0) * dot(&za, &rhat) * dot(&zb, &rhat);
    Ok(R::of(DIPOLAR_CONSTANT_MHZ_NM3) / (r2 * r) * angular)
}

fn effective<R: Real>(nu: R, drive: Option<(R, R)>) -> R {
    match drive {
        None => nu,
        Some((op, om)) => {
            effective_coupling(op, om, nu).expect("validated nonzero ensemble drive")
        }
    }
}

/// Root-sum-square effective coupling of a central spin to the off-axis
/// bath within the cutoff: Δ = √(Σ_k ν_eff,k²). Same-axis sites are
/// excluded because resonant exchange with them is suppressed.
pub fn delta_statistic<R: Real>(
    sites: &[SpinSite<R>],
    central: &SpinSite<R>,
    cutoff: R,
    drive: Option<(R, R)>,
) -> R {
    let cutoff2 = cutoff * cutoff;
    let mut sum = R::zero();
    for site in sites {
        if site.axis_class == central.axis_class {
            continue;
        }
        let sep = [
            site.position[0] - central.position[0],
            site.position[1] - central.position[1],
            site.position[2] - central.position[2],
        ];
        let r2 = dot(&sep, &sep);
        if r2 > cutoff2 || r2.is_zero() {
            continue;
        }
        let nu = pairwise_coupling(central, site).expect("distinct positions");
        let nu_eff = effective(nu, drive);
        sum += nu_eff * nu_eff;
    }
    sum.sqrt()
}

/// Strongest pairwise |ν_eff| within the driven (off-axis) population for
/// one configuration; None when fewer than two driven sites fall within the
/// cutoff of each other.
pub fn rdd_statistic<R: Real>(
    sites: &[SpinSite<R>],
    nd_class: usize,
    cutoff: R,
    drive: Option<(R, R)>,
) -> Option<R> {
    let cutoff2 = cutoff * cutoff;
    let driven: Vec<&SpinSite<R>> =
        sites.iter().filter(|s| s.axis_class != nd_class).collect();
    let mut best: Option<R> = None;
    for (i, a) in driven.iter().enumerate() {
        for b in &driven[i + 1..] {
            let dx = b.position[0] - a.position[0];
            if dx * dx > cutoff2 {
                continue;
            }
            let sep = [dx, b.position[1] - a.position[1], b.position[2] - a.position[2]];
            let r2 = dot(&sep, &sep);
            if r2 > cutoff2 || r2.is_zero() {
                continue;
            }
            let nu = pairwise_coupling(a, b).expect("distinct positions");
            let v = effective(nu, drive).abs();
            best = Some(match best {
                None => v,
                Some(m) => m.max(v),
            });
        }
    }
    best
}

/// Per-spin strongest-partner |ν_eff| within the driven population; one
/// entry per driven spin that has at least one partner within the cutoff.
/// This is the alternative reading of the strongest-coupling statistic,
/// kept behind its own entry point.
pub fn rdd_per_spin<R: Real>(
    sites: &[SpinSite<R>],
    nd_class: usize,
    cutoff: R,
    drive: Option<(R, R)>,
) -> Vec<R> {
    let cutoff2 = cutoff * cutoff;
    let driven: Vec<&SpinSite<R>> =
        sites.iter().filter(|s| s.axis_class != nd_class).collect();
    let mut maxima = vec![None::<R>; driven.len()];
    for (i, a) in driven.iter().enumerate() {
        for (j, b) in driven.iter().enumerate().skip(i + 1) {
            let sep = [
                b.position[0] - a.position[0],
                b.position[1] - a.position[1],
                b.position[2] - a.position[2],
            ];
            let r2 = dot(&sep, &sep);
            if r2 > cutoff2 || r2.is_zero() {
                continue;
            }
            let nu = pairwise_coupling(a, b).expect("distinct positions");
            let v = effective(nu, drive).abs();
            for slot in [i, j] {
                maxima[slot] = Some(match maxima[slot] {
                    None => v,
                    Some(m) => m.max(v),
                });
            }
        }
    }
    maxima.into_iter().flatten().collect()
}

/// Per-configuration samples of Δ and R_dd for one ensemble configuration
/// set. The central spin sits at the box center on `central_class`, which
/// is also the undriven axis class of the R_dd statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSamples<R> {
    pub delta: Vec<R>,
    pub rdd: Vec<R>,
    /// Configurations that produced no R_dd sample.
    pub rdd_no_sample: usize,
}

/// Run the Monte Carlo: one (Δ, R_dd) draw per configuration, in parallel,
/// assembled in configuration order.
pub fn collect_samples<R: Real>(
    cfg: &EnsembleConfig<R>,
    central_class: usize,
) -> Result<EnsembleSamples<R>> {
    cfg.validate()?;
    if central_class >= 4 {
        return Err(Error::invalid("axis class index must be in 0..4"));
    }
    let half = cfg.box_edge_nm * R::of(0.5);
    let central = SpinSite { position: [half, half, half], axis_class: central_class };
    let per_config: Vec<(R, Option<R>)> = (0..cfg.n_configs as u64)
        .into_par_iter()
        .map(|index| {
            let sites = sample_configuration(cfg, index);
            let delta = delta_statistic(&sites, &central, cfg.cutoff_nm, cfg.drive);
            let rdd = rdd_statistic(&sites, central_class, cfg.cutoff_nm, cfg.drive);
            (delta, rdd)
        })
        .collect();
    let delta: Vec<R> = per_config.iter().map(|p| p.0).collect();
    let rdd: Vec<R> = per_config.iter().filter_map(|p| p.1).collect();
    let rdd_no_sample = cfg.n_configs - rdd.len();
    Ok(EnsembleSamples { delta, rdd, rdd_no_sample })
}

/// Histogram statistics of a sample set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PdfSummary<R> {
    /// Mode of the 3-bin moving-average smoothed histogram; None below 100
    /// samples.
    pub peak: Option<R>,
    /// Full width at half maximum of the raw histogram by linear
    /// interpolation of the half-max crossings; None below 100 samples.
    pub fwhm: Option<R>,
    pub bin_edges: Vec<R>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
    /// Samples beyond the binning range, folded into the last bin so that
    /// the counts still sum to `n_samples`. Dipolar-coupling distributions
    /// have r⁻³ heavy tails, so the range is capped near the 95th
    /// percentile to keep the bulk resolved.
    pub clipped: u64,
}

/// Histogram with peak/FWHM extraction. Peak and FWHM need at least 100
/// samples; the histogram itself is always produced.
pub fn pdf_summary<R: Real>(samples: &[R], n_bins: usize) -> Result<PdfSummary<R>> {
    if n_bins < 3 {
        return Err(Error::invalid("pdf_summary needs at least 3 bins"));
    }
    if samples.is_empty() {
        return Ok(PdfSummary {
            peak: None,
            fwhm: None,
            bin_edges: Vec::new(),
            counts: Vec::new(),
            n_samples: 0,
            clipped: 0,
        });
    }
    let mut lo = samples.iter().fold(R::infinity(), |m, &v| m.min(v));
    let max = samples.iter().fold(-R::infinity(), |m, &v| m.max(v));
    // Cap the range near the 95th percentile so heavy r⁻³ tails cannot
    // collapse the bulk of the distribution into one bin.
    let mut sorted: Vec<R> = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let q_idx = ((sorted.len() as f64 * 0.95).ceil() as usize).clamp(1, sorted.len()) - 1;
    let q95 = sorted[q_idx];
    let mut hi = max.min(q95 + (q95 - lo));
    if hi <= lo {
        // Degenerate sample set: widen symmetrically by a relative epsilon.
        let pad = lo.abs().max(R::of(1e-9)) * R::of(1e-9);
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / R::of(n_bins as f64);
    let mut counts = vec![0u64; n_bins];
    let mut clipped = 0u64;
    for &v in samples {
        let mut k = ((v - lo) / width).as_f64() as usize;
        if k >= n_bins {
            k = n_bins - 1;
            if v > hi {
                clipped += 1;
            }
        }
        counts[k] += 1;
    }
    let bin_edges: Vec<R> =
        (0..=n_bins).map(|k| lo + width * R::of(k as f64)).collect();
    // The last bin is excluded from peak/FWHM extraction when it holds
    // clipped tail mass.
    let search_end = if clipped > 0 { n_bins - 1 } else { n_bins };

    let (peak, fwhm) = if samples.len() >= 100 {
        let center = |k: usize| lo + width * (R::of(k as f64) + R::of(0.5));
        // Peak: mode of the 3-bin moving-average smoothed histogram.
        let smooth: Vec<R> = (0..n_bins)
            .map(|k| {
                let window = &counts[k.saturating_sub(1)..(k + 2).min(n_bins)];
                let acc = window.iter().fold(R::zero(), |s, &c| s + R::of(c as f64));
                acc / R::of(window.len() as f64)
            })
            .collect();
        let mut kmode = 0usize;
        for k in 1..search_end {
            if smooth[k] > smooth[kmode] {
                kmode = k;
            }
        }
        let peak = center(kmode);

        // FWHM: linear interpolation of the raw histogram's half-max
        // crossings, so a degenerate sample set reports at most one bin.
        let mut kmax = 0usize;
        for k in 1..search_end {
            if counts[k] > counts[kmax] {
                kmax = k;
            }
        }
        let raw = |k: usize| R::of(counts[k] as f64);
        let half = raw(kmax) * R::of(0.5);
        let mut left = lo;
        for k in (0..=kmax).rev() {
            if raw(k) < half {
                let (y0, y1) = (raw(k), raw(k + 1));
                let frac = (half - y0) / (y1 - y0);
                left = center(k) + width * frac;
                break;
            }
            if k == 0 {
                left = lo;
            }
        }
        let mut right = hi;
        for k in kmax..search_end {
            if raw(k) < half {
                let (y0, y1) = (raw(k - 1), raw(k));
                let frac = (y0 - half) / (y0 - y1);
                right = center(k - 1) + width * frac;
                break;
            }
        }
        (Some(peak), Some((right - left).max(R::zero())))
    } else {
        (None, None)
    };

    Ok(PdfSummary { peak, fwhm, bin_edges, counts, n_samples: samples.len(), clipped })
}

/// One grid point of the drive sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DrivePoint<R> {
    pub omega_minus: R,
    pub delta: PdfSummary<R>,
    pub rdd: PdfSummary<R>,
    /// Peak and FWHM ratios against the not-driven reference.
    pub delta_peak_ratio: Option<R>,
    pub delta_fwhm_ratio: Option<R>,
    pub rdd_peak_ratio: Option<R>,
    pub rdd_fwhm_ratio: Option<R>,
    /// Homogenization figure: FWHM/peak of the driven Δ distribution.
    pub delta_fwhm_over_peak: Option<R>,
}

/// Drive sweep result: the not-driven reference plus one point per Ω₋.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSweep<R> {
    pub omega_plus: R,
    pub nd_delta: PdfSummary<R>,
    pub nd_rdd: PdfSummary<R>,
    pub points: Vec<DrivePoint<R>>,
}

fn ratio<R: Real>(num: Option<R>, den: Option<R>) -> Option<R> {
    match (num, den) {
        (Some(n), Some(d)) if !d.is_zero() => Some(n / d),
        _ => None,
    }
}

/// Sweep the second drive amplitude at fixed Ω₊, reporting Δ and R_dd
/// summaries and their ratios against the not-driven case. All points reuse
/// the same seeded configurations, so ratios isolate the drive factor.
pub fn sweep_drive<R: Real>(
    cfg: &EnsembleConfig<R>,
    omega_plus: R,
    omega_minus_grid: &[R],
    central_class: usize,
    n_bins: usize,
) -> Result<DriveSweep<R>> {
    if !(omega_plus > R::zero()) {
        return Err(Error::invalid("sweep_drive requires omega_plus > 0"));
    }
    let mut nd_cfg = cfg.clone();
    nd_cfg.drive = None;
    let nd = collect_samples(&nd_cfg, central_class)?;
    let nd_delta = pdf_summary(&nd.delta, n_bins)?;
    let nd_rdd = pdf_summary(&nd.rdd, n_bins)?;

    let points = omega_minus_grid
        .par_iter()
        .map(|&om| -> Result<DrivePoint<R>> {
            let mut dcfg = cfg.clone();
            dcfg.drive = Some((omega_plus, om));
            let s = collect_samples(&dcfg, central_class)?;
            let delta = pdf_summary(&s.delta, n_bins)?;
            let rdd = pdf_summary(&s.rdd, n_bins)?;
            Ok(DrivePoint {
                omega_minus: om,
                delta_peak_ratio: ratio(delta.peak, nd_delta.peak),
                delta_fwhm_ratio: ratio(delta.fwhm, nd_delta.fwhm),
                rdd_peak_ratio: ratio(rdd.peak, nd_rdd.peak),
                rdd_fwhm_ratio: ratio(rdd.fwhm, nd_rdd.fwhm),
                delta_fwhm_over_peak: ratio(delta.fwhm, delta.peak),
                delta,
                rdd,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DriveSweep { omega_plus, nd_delta, nd_rdd, points })
}

impl<R: Real> DriveSweep<R> {
    /// CSV: one row per grid point with peak/FWHM values and ratios.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "omega_minus_mhz,delta_peak_mhz,delta_fwhm_mhz,rdd_peak_mhz,rdd_fwhm_mhz,\
             delta_peak_ratio,delta_fwhm_ratio,rdd_peak_ratio,rdd_fwhm_ratio,delta_fwhm_over_peak"
        )?;
        let fmt = |v: Option<R>| match v {
            Some(x) => format!("{}", x.as_f64()),
            None => String::new(),
        };
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                p.omega_minus.as_f64(),
                fmt(p.delta.peak),
                fmt(p.delta.fwhm),
                fmt(p.rdd.peak),
                fmt(p.rdd.fwhm),
                fmt(p.delta_peak_ratio),
                fmt(p.delta_fwhm_ratio),
                fmt(p.rdd_peak_ratio),
                fmt(p.rdd_fwhm_ratio),
                fmt(p.delta_fwhm_over_peak),
            )?;
        }
        Ok(())
    }
}

/// Raw sample dump for external re-analysis: one column per statistic.
pub fn write_samples_csv<R: Real, W: std::io::Write>(
    samples: &EnsembleSamples<R>,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "config_index,delta_mhz")?;
    for (i, d) in samples.delta.iter().enumerate() {
        writeln!(w, "{},{}", i, d.as_f64())?;
    }
    writeln!(w)?;
    writeln!(w, "sample_index,rdd_mhz")?;
    for (i, v) in samples.rdd.iter().enumerate() {
        writeln!(w, "{},{}", i, v.as_f64())?;
    }
    Ok(())
}
