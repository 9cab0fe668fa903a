//! Experiment configuration: one TOML file with every block optional.

use std::path::{Path, PathBuf};

use ghz_core::chip::HeaterCalibration;
use ghz_core::qmath::{PauliLabel, QUBITS};
use ghz_core::simulator::{LossBudget, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Post-selected events per measurement setting.
    pub shots: u64,
    /// Use exact outcome probabilities instead of sampled counts.
    pub exact: bool,
    pub noise: NoiseModel,
    pub simulate: SimulateConfig,
    pub phase_scan: PhaseScanConfig,
    pub tomography: TomographyConfig,
    pub bell_sweep: BellSweepConfig,
    pub qss: QssConfig,
    pub calibrate: CalibrateConfig,
    pub rate: LossBudget,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            shots: 450,
            exact: false,
            noise: NoiseModel::default(),
            simulate: SimulateConfig::default(),
            phase_scan: PhaseScanConfig::default(),
            tomography: TomographyConfig::default(),
            bell_sweep: BellSweepConfig::default(),
            qss: QssConfig::default(),
            calibrate: CalibrateConfig::default(),
            rate: LossBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub settings: [PauliLabel; QUBITS],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            settings: [PauliLabel::Z; QUBITS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseScanConfig {
    /// 1-based resistor of the alpha bank that is swept.
    pub heater: usize,
    pub power_min_mw: f64,
    pub power_max_mw: f64,
    pub points: usize,
    /// State phase with the swept heater off (rad).
    pub phase_at_zero_power: f64,
}

impl Default for PhaseScanConfig {
    fn default() -> Self {
        Self {
            heater: 1,
            power_min_mw: 0.0,
            power_max_mw: 100.0,
            points: 41,
            phase_at_zero_power: 0.0518,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    /// Poisson resamples for the error bars; 0 skips them.
    pub resamples: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            resamples: 50,
            max_iterations: 5000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellSweepConfig {
    /// 1-based photon whose master fraction is scaled.
    pub photon: usize,
    pub scales: Vec<f64>,
}

impl Default for BellSweepConfig {
    fn default() -> Self {
        Self {
            photon: 1,
            scales: vec![1.0, 0.75, 0.5, 0.25, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QssConfig {
    pub rounds: usize,
}

impl Default for QssConfig {
    fn default() -> Self {
        Self { rounds: 4060 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    /// Heater calibration file, relative to the config file; built-in when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heater_file: Option<PathBuf>,
    /// Target MZI input phases (rad).
    pub alpha: [f64; QUBITS],
    /// Target MZI internal phases (rad).
    pub phi: [f64; QUBITS],
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        // all four parties set up for the X measurement
        Self {
            heater_file: None,
            alpha: [0.0; QUBITS],
            phi: [std::f64::consts::FRAC_PI_2; QUBITS],
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

fn core_field(prefix: &str, e: ghz_core::Error) -> CliError {
    match e {
        ghz_core::Error::InvalidParameter { name, reason } => {
            invalid(&format!("{prefix}.{name}"), reason)
        }
        other => invalid(prefix, other),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; a relative `heater_file` is resolved
    /// against the directory of `path`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(f) = &cfg.calibrate.heater_file {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.calibrate.heater_file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Events per setting, `None` when exact probabilities are requested.
    pub fn shots(&self) -> Option<u64> {
        (!self.exact).then_some(self.shots)
    }

    pub fn heater_calibration(&self) -> Result<HeaterCalibration, CliError> {
        match &self.calibrate.heater_file {
            None => Ok(HeaterCalibration::default()),
            Some(p) => HeaterCalibration::load(p).map_err(|e| invalid("calibrate.heater_file", e)),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.exact && self.shots == 0 {
            return Err(invalid("shots", "must be positive unless `exact = true`"));
        }
        if !self.noise.theta.is_finite() {
            return Err(invalid("noise.theta", "must be finite"));
        }
        self.noise
            .source
            .validate()
            .map_err(|e| core_field("noise.source", e))?;
        self.noise
            .detectors
            .validate()
            .map_err(|e| core_field("noise.detectors", e))?;
        self.noise.validate().map_err(|e| core_field("noise", e))?;

        let ps = &self.phase_scan;
        if !(1..=8).contains(&ps.heater) {
            return Err(invalid(
                "phase_scan.heater",
                format!("{} is not an alpha-bank resistor (1..=8)", ps.heater),
            ));
        }
        if !(ps.power_min_mw >= 0.0
            && ps.power_max_mw > ps.power_min_mw
            && ps.power_max_mw.is_finite())
        {
            return Err(invalid(
                "phase_scan",
                "need 0 <= power_min_mw < power_max_mw",
            ));
        }
        if ps.points < 5 {
            return Err(invalid("phase_scan.points", "need at least 5"));
        }
        if !ps.phase_at_zero_power.is_finite() {
            return Err(invalid("phase_scan.phase_at_zero_power", "must be finite"));
        }

        let t = &self.tomography;
        if t.resamples == 1 {
            return Err(invalid("tomography.resamples", "use 0 (off) or at least 2"));
        }
        if t.max_iterations == 0 {
            return Err(invalid("tomography.max_iterations", "must be positive"));
        }
        if t.tolerance.is_nan() || t.tolerance <= 0.0 {
            return Err(invalid("tomography.tolerance", "must be positive"));
        }

        let b = &self.bell_sweep;
        if !(1..=4).contains(&b.photon) {
            return Err(invalid(
                "bell_sweep.photon",
                format!("{} outside 1..=4", b.photon),
            ));
        }
        if b.scales.is_empty() || b.scales.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(invalid(
                "bell_sweep.scales",
                "need a non-empty list of values in [0, 1]",
            ));
        }

        if self.qss.rounds == 0 {
            return Err(invalid("qss.rounds", "must be positive"));
        }
        let c = &self.calibrate;
        if c.alpha.iter().chain(&c.phi).any(|p| !p.is_finite()) {
            return Err(invalid("calibrate", "target phases must be finite"));
        }
        self.rate.validate().map_err(|e| core_field("rate", e))?;
        Ok(())
    }
}

/// Default configuration with comments, written by `config-init`.
pub const TEMPLATE: &str = r#"# ghzlab experiment configuration. Every key is optional.

seed = 1
# post-selected four-fold events per measurement setting
shots = 450
# true: use exact outcome probabilities, no shot noise
exact = false

[noise]
# relative phase of the generated state (rad)
theta = 0.0
# directional-coupler reflectivities of the preparation stage
reflectivities = [0.5, 0.505, 0.4905, 0.503]

[noise.toggles]
multiphoton = true
distinguishability = true
imperfect_couplers = true
detector_imbalance = true

[noise.source]
# second-order autocorrelation at zero delay
g2 = 0.005
# per-photon transmission, source to detector
eta = 0.039
# multiplies each photon's master fraction
distinguishability_scale = [1.0, 1.0, 1.0, 1.0]

[noise.source.overlaps]
# corrected two-photon HOM overlaps between source slots
ab = 0.924
ac = 0.915
bd = 0.881
cd = 0.921

[noise.detectors]
# per-mode detection efficiencies, upper mode first for each qubit;
# lower modes from the mean balance errors 0.026, 0.055, 0.032, 0.016
efficiencies = [1.0, 0.9011406844106463, 1.0, 0.8018018018018017, 1.0, 0.8796992481203006, 1.0, 0.937984496124031]

[simulate]
settings = ["z", "z", "z", "z"]

[phase_scan]
# alpha-bank resistor (1..=8) that is swept
heater = 1
power_min_mw = 0.0
power_max_mw = 100.0
points = 41
# state phase with the heater off; puts the witness maximum near 52.8 mW
phase_at_zero_power = 0.0518

[tomography]
# Poisson resamples for error bars (0 = off)
resamples = 50
max_iterations = 5000
tolerance = 1e-10

[bell_sweep]
# photon (1..=4) whose master fraction is scaled
photon = 1
scales = [1.0, 0.75, 0.5, 0.25, 0.0]

[qss]
rounds = 4060

[calibrate]
# heater_file = "heaters.toml"
alpha = [0.0, 0.0, 0.0, 0.0]
phi = [1.5707963267948966, 1.5707963267948966, 1.5707963267948966, 1.5707963267948966]

[rate]
# pump repetition rate (Hz)
repetition_rate = 79e6
filling_factor = 0.67
# first-lens brightness
brightness = 0.5
eta_coupling = 0.29
eta_demux = 0.75
eta_chip = 0.54
eta_detector = 0.65
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_the_default() {
        let cfg = ExperimentConfig::from_toml_str(TEMPLATE).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let once = ExperimentConfig::from_toml_str(TEMPLATE)
            .unwrap()
            .to_toml_string();
        let twice = ExperimentConfig::from_toml_str(&once)
            .unwrap()
            .to_toml_string();
        assert_eq!(once, twice);
        let empty = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(empty, ExperimentConfig::default());
    }

    #[test]
    fn partial_blocks_keep_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[noise.source]\ng2 = 0.01\n").unwrap();
        assert_eq!(cfg.noise.source.g2, 0.01);
        assert_eq!(cfg.noise.source.eta, 0.039);
        assert_eq!(cfg.noise.detectors, NoiseModel::default().detectors);
    }

    #[test]
    fn field_level_errors() {
        let msg = |s: &str| ExperimentConfig::from_toml_str(s).unwrap_err().to_string();
        assert!(msg("[noise.source]\ng2 = 2.0\n").contains("noise.source.g2"));
        assert!(msg("[phase_scan]\nheater = 9\n").contains("phase_scan.heater"));
        assert!(msg("[bell_sweep]\nscales = [1.5]\n").contains("bell_sweep.scales"));
        assert!(msg("shots = 0\n").contains("shots"));
        assert!(msg("[rate]\neta_chip = 0.0\n").contains("rate.eta_chip"));
        assert!(msg("bogus = 1\n").contains("bogus"));
        assert!(ExperimentConfig::from_toml_str("shots = 0\nexact = true\n").is_ok());
    }
}
