//! Switchable noise sources for ablation studies.

use serde::{Deserialize, Serialize};

use super::{DetectorModel, Simulator};
use crate::chip::{PreparationStage, MEASURED_REFLECTIVITIES};
use crate::error::Result;
use crate::qmath::QUBITS;
use crate::source::{fit_master_fractions, MasterFractions, SourceSpec};

/// Mean detector-balance error per party before re-calibration.
pub const PARTY_BALANCE_ERRORS: [f64; QUBITS] = [0.026, 0.055, 0.032, 0.016];

/// Which imperfections are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseToggles {
    pub multiphoton: bool,
    pub distinguishability: bool,
    pub imperfect_couplers: bool,
    pub detector_imbalance: bool,
}

impl NoiseToggles {
    pub const NONE: Self = Self {
        multiphoton: false,
        distinguishability: false,
        imperfect_couplers: false,
        detector_imbalance: false,
    };

    pub const ALL: Self = Self {
        multiphoton: true,
        distinguishability: true,
        imperfect_couplers: true,
        detector_imbalance: true,
    };

    /// Source and coupler noise, ideal detectors.
    pub const WITHOUT_DETECTORS: Self = Self {
        detector_imbalance: false,
        ..Self::ALL
    };
}

impl Default for NoiseToggles {
    fn default() -> Self {
        Self::ALL
    }
}

/// Full parameter set; toggled-off imperfections are replaced by their
/// ideal values when the simulator is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub source: SourceSpec,
    pub reflectivities: [f64; 4],
    pub detectors: DetectorModel,
    pub toggles: NoiseToggles,
    /// Relative phase of the generated state.
    #[serde(default)]
    pub theta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            source: SourceSpec::default(),
            reflectivities: MEASURED_REFLECTIVITIES,
            detectors: DetectorModel::from_balance_errors(PARTY_BALANCE_ERRORS)
                .expect("errors below 1/2"),
            toggles: NoiseToggles::ALL,
            theta: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn with_toggles(toggles: NoiseToggles) -> Self {
        Self {
            toggles,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.detectors.validate()?;
        PreparationStage::new([0.0; 8], self.reflectivities)?;
        Ok(())
    }

    /// Source, fractions, stage and detectors actually simulated.
    pub fn effective(
        &self,
    ) -> Result<(SourceSpec, MasterFractions, PreparationStage, DetectorModel)> {
        self.validate()?;
        let t = self.toggles;
        let mut source = self.source;
        if !t.multiphoton {
            source.g2 = 0.0;
        }
        let fractions = if t.distinguishability {
            fit_master_fractions(&source.overlaps.entries())?
        } else {
            source.distinguishability_scale = [1.0; 4];
            MasterFractions::ones()
        };
        let reflectivities = if t.imperfect_couplers {
            self.reflectivities
        } else {
            [0.5; 4]
        };
        let mut stage = PreparationStage::new([0.0; 8], reflectivities)?;
        stage.set_state_phase(self.theta);
        let detectors = if t.detector_imbalance {
            self.detectors
        } else {
            DetectorModel::perfect()
        };
        Ok((source, fractions, stage, detectors))
    }

    pub fn simulator(&self) -> Result<Simulator> {
        let (source, fractions, stage, detectors) = self.effective()?;
        Simulator::new(&source, &fractions, stage, detectors)
    }
}
