//! Run-configuration schema: a JSON document selecting one experiment, the
//! spin-pair parameters, and output options. Unknown keys are rejected so a
//! typo cannot silently change a run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nvpair_sim::model::SystemParams;
use nvpair_sim::sequences::{Basis, PrepB};
use nvpair_sim::spinops::Level;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub system: SystemConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeConfig,
    /// Optional binomial shot noise per sweep point.
    #[serde(default)]
    pub shots: Option<u64>,
    /// Multiply Ramsey signals by the probe's T2* envelope.
    #[serde(default)]
    pub apply_t2star: bool,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    #[default]
    Rwa,
    Lab,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub d_mhz: f64,
    pub zeeman_a_mhz: f64,
    pub zeeman_b_mhz: f64,
    pub nu_dip_mhz: f64,
    #[serde(default)]
    pub t2star_a_us: Option<f64>,
    #[serde(default)]
    pub t2star_b_us: Option<f64>,
}

impl SystemConfig {
    pub fn to_params(&self) -> nvpair_sim::Result<SystemParams<f64>> {
        SystemParams::new(self.d_mhz, self.zeeman_a_mhz, self.zeeman_b_mhz, self.nu_dip_mhz)?
            .with_t2star(self.t2star_a_us, self.t2star_b_us)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BasisConfig {
    Sq,
    Dq,
}

impl BasisConfig {
    pub fn to_basis(self) -> Basis {
        match self {
            BasisConfig::Sq => Basis::Sq,
            BasisConfig::Dq => Basis::Dq,
        }
    }
}

/// Control-spin preparation: a level token ("0", "+1", "-1") or a
/// continuous drive pair `{"drive": [omega_plus, omega_minus]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PrepBConfig {
    State(String),
    Drive { drive: [f64; 2] },
}

impl PrepBConfig {
    pub fn to_prep(&self) -> Result<PrepB<f64>, String> {
        match self {
            PrepBConfig::State(token) => match token.as_str() {
                "0" => Ok(PrepB::State(Level::Zero)),
                "+1" => Ok(PrepB::State(Level::Plus1)),
                "-1" => Ok(PrepB::State(Level::Minus1)),
                other => Err(format!(
                    "prep_b: unknown state `{other}` (expected \"0\", \"+1\", \"-1\" or a drive)"
                )),
            },
            PrepBConfig::Drive { drive } => {
                Ok(PrepB::Drive { omega_plus: drive[0], omega_minus: drive[1] })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Deer {
        basis: BasisConfig,
        #[serde(default = "default_tau_start")]
        tau_start_us: f64,
        tau_stop_us: f64,
        n_points: usize,
    },
    Ramsey {
        basis: BasisConfig,
        prep_b: PrepBConfig,
        reference_offset_mhz: f64,
        #[serde(default = "default_tau_start")]
        tau_start_us: f64,
        tau_stop_us: f64,
        n_points: usize,
    },
    AlphaSweep {
        n_alpha: usize,
        omega_scale_mhz: f64,
        reference_offset_mhz: f64,
        #[serde(default = "default_tau_start")]
        tau_start_us: f64,
        tau_stop_us: f64,
        n_points: usize,
    },
    HhSweep {
        drive_b: [f64; 2],
        omega_a_start_mhz: f64,
        omega_a_stop_mhz: f64,
        n_points: usize,
        /// Spin-lock duration; when absent, half the transfer period
        /// 1/(2 ν_eff) at the matching condition.
        #[serde(default)]
        tau_us: Option<f64>,
    },
    HhTransfer {
        drive_b: [f64; 2],
        /// Lock amplitude; when absent, the matching condition.
        #[serde(default)]
        omega_a_mhz: Option<f64>,
        tau_stop_us: f64,
        n_points: usize,
    },
    Ensemble {
        density_ppm: f64,
        box_edge_nm: f64,
        cutoff_nm: f64,
        n_configs: usize,
        /// (Ω₊, Ω₋) on the driven classes; absent means not driven.
        #[serde(default)]
        drive: Option<[f64; 2]>,
        #[serde(default)]
        central_class: usize,
        #[serde(default = "default_bins")]
        n_bins: usize,
        /// Also dump raw Δ/R_dd samples for external re-analysis.
        #[serde(default)]
        dump_samples: bool,
        /// When present, sweep Ω₋ over this grid at fixed Ω₊ (the first
        /// drive amplitude, or 10 MHz when no drive is given).
        #[serde(default)]
        omega_minus_grid: Option<Vec<f64>>,
    },
    /// Evolve a sequence-format file once and report its readout.
    Sequence { file: PathBuf },
}

fn default_tau_start() -> f64 {
    0.1
}

fn default_bins() -> usize {
    60
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Validate everything that can be checked before any computation.
    pub fn validate(&self) -> Result<(), String> {
        self.system.to_params().map_err(|e| format!("system: {e}"))?;
        match &self.experiment {
            ExperimentConfig::Deer { tau_start_us, tau_stop_us, n_points, .. }
            | ExperimentConfig::Ramsey { tau_start_us, tau_stop_us, n_points, .. }
            | ExperimentConfig::AlphaSweep { tau_start_us, tau_stop_us, n_points, .. } => {
                if !(*tau_start_us > 0.0) {
                    return Err("experiment.tau_start_us must be positive".into());
                }
                if !(*tau_stop_us > *tau_start_us) {
                    return Err("experiment.tau_stop_us must exceed tau_start_us".into());
                }
                if *n_points < 2 {
                    return Err("experiment.n_points must be at least 2".into());
                }
            }
            ExperimentConfig::HhSweep {
                drive_b, omega_a_start_mhz, omega_a_stop_mhz, n_points, tau_us,
            } => {
                if drive_b[0] < 0.0 || drive_b[1] < 0.0 {
                    return Err("experiment.drive_b amplitudes must be nonnegative".into());
                }
                if !(*omega_a_stop_mhz > *omega_a_start_mhz) || !(*omega_a_start_mhz > 0.0) {
                    return Err("experiment.omega_a range must be positive and ascending".into());
                }
                if *n_points < 5 {
                    return Err("experiment.n_points must be at least 5 for the dip fit".into());
                }
                if let Some(tau) = tau_us {
                    if !(*tau > 0.0) {
                        return Err("experiment.tau_us must be positive".into());
                    }
                } else if drive_b[0] == 0.0 && drive_b[1] == 0.0 {
                    return Err(
                        "experiment.tau_us is required when drive_b is zero (no matching \
                         condition to derive it from)"
                            .into(),
                    );
                }
            }
            ExperimentConfig::HhTransfer { drive_b, omega_a_mhz, tau_stop_us, n_points } => {
                if !(*tau_stop_us > 0.0) {
                    return Err("experiment.tau_stop_us must be positive".into());
                }
                if *n_points < 8 {
                    return Err("experiment.n_points must be at least 8 for the fit".into());
                }
                if omega_a_mhz.is_none() && drive_b[0] == 0.0 && drive_b[1] == 0.0 {
                    return Err(
                        "experiment.omega_a_mhz is required when drive_b is zero".into(),
                    );
                }
            }
            ExperimentConfig::Ensemble {
                density_ppm, box_edge_nm, cutoff_nm, n_configs, n_bins, ..
            } => {
                if !(*density_ppm > 0.0) {
                    return Err("experiment.density_ppm must be positive".into());
                }
                if !(*box_edge_nm > 2.0 * *cutoff_nm) {
                    return Err("experiment.box_edge_nm must exceed twice cutoff_nm".into());
                }
                if *n_configs < 1 {
                    return Err("experiment.n_configs must be at least 1".into());
                }
                if *n_bins < 3 {
                    return Err("experiment.n_bins must be at least 3".into());
                }
            }
            ExperimentConfig::Sequence { file } => {
                if !file.exists() {
                    return Err(format!(
                        "experiment.file: `{}` does not exist",
                        file.display()
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_deer_config() {
        let text = r#"{
            "experiment": { "kind": "deer", "basis": "sq", "tau_stop_us": 40.0, "n_points": 400 },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.mode, ModeConfig::Rwa);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{
            "experiment": { "kind": "deer", "basis": "sq", "tau_stop_us": 40.0, "n_points": 400 },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 },
            "extra_knob": 7
        }"#;
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(err.contains("extra_knob"), "{err}");
    }

    #[test]
    fn negative_tau_is_named_in_the_error() {
        let text = r#"{
            "experiment": { "kind": "deer", "basis": "sq", "tau_stop_us": -5.0, "n_points": 400 },
            "system": { "d_mhz": 2870.0, "zeeman_a_mhz": 100.0, "zeeman_b_mhz": 40.0, "nu_dip_mhz": 0.25 }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.contains("tau_stop_us"), "{err}");
    }

    #[test]
    fn prep_b_accepts_states_and_drives() {
        let s: PrepBConfig = serde_json::from_str(r#""+1""#).unwrap();
        assert!(matches!(s.to_prep().unwrap(), PrepB::State(Level::Plus1)));
        let d: PrepBConfig = serde_json::from_str(r#"{ "drive": [3.0, 1.0] }"#).unwrap();
        assert!(matches!(d.to_prep().unwrap(), PrepB::Drive { .. }));
        let bad = PrepBConfig::State("up".into());
        assert!(bad.to_prep().is_err());
    }
}
