//! Simulation and characterisation of a four-photon path-encoded GHZ chip:
//! linear-optical scattering with a noisy source, threshold detection,
//! tomography, witnesses and secret sharing.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chip;
pub mod error;
pub mod qmath;
pub mod qss;
pub mod rng;
pub mod simulator;
pub mod source;

pub use analysis::{BellResult, MeasurementRecord, PhaseFit, TomographySet, WitnessResult};
pub use chip::{HeaterCalibration, MziPhases, MziSetting, PreparationStage};
pub use error::{Error, Result};
pub use qmath::{DensityMatrix, PauliLabel, PureState};
pub use qss::{BasisChoice, QssReport, RoundRecord};
pub use simulator::{
    DetectorModel, LossBudget, NoiseModel, NoiseToggles, OutcomeDistribution, Simulator,
};
pub use source::{MasterFractions, Overlaps, SourceSpec};
