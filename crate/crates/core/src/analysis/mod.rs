//! State characterisation from measurement records: expectation values,
//! the phase and stabilizer witnesses, the Bell-like value and tomography.

mod phase_fit;
mod tomography;

pub use phase_fit::{fit_phase_scan, PhaseFit};
pub use tomography::{
    density_matrix_table, linear_inversion, max_fidelity_over_phase, mle_reconstruct,
    monte_carlo_error, monte_carlo_errors, simulate_tomography, tomography_settings,
    DensityMatrixJson, MleOptions, MleResult, TomographySet,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{index_bits, PauliLabel, DIM, QUBITS};
use crate::rng;
use crate::simulator::{sample_counts, Simulator};

/// Per-outcome tallies of one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tally {
    Counts([u64; DIM]),
    /// Conditional outcome probabilities (no shot noise).
    Exact([f64; DIM]),
}

/// Outcomes recorded at one measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub settings: [PauliLabel; QUBITS],
    pub tally: Tally,
}

impl MeasurementRecord {
    pub fn counts(settings: [PauliLabel; QUBITS], counts: [u64; DIM]) -> Self {
        Self {
            settings,
            tally: Tally::Counts(counts),
        }
    }

    pub fn exact(settings: [PauliLabel; QUBITS], probs: [f64; DIM]) -> Self {
        Self {
            settings,
            tally: Tally::Exact(probs),
        }
    }

    /// Number of events, `None` for exact records.
    pub fn shots(&self) -> Option<u64> {
        match &self.tally {
            Tally::Counts(c) => Some(c.iter().sum()),
            Tally::Exact(_) => None,
        }
    }

    /// Outcome weights as reals (counts or probabilities).
    pub fn weights(&self) -> [f64; DIM] {
        match &self.tally {
            Tally::Counts(c) => c.map(|n| n as f64),
            Tally::Exact(p) => *p,
        }
    }

    /// Normalised outcome frequencies.
    pub fn frequencies(&self) -> Result<[f64; DIM]> {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(w.map(|x| x / total))
    }
}

/// Simulated record at `settings`; exact when `shots` is `None`.
pub fn simulate_record(
    sim: &Simulator,
    settings: [PauliLabel; QUBITS],
    shots: Option<u64>,
    seed: u64,
) -> Result<MeasurementRecord> {
    let dist = sim.measure(&settings)?;
    Ok(match shots {
        None => MeasurementRecord::exact(settings, dist.conditional()?),
        Some(n) => MeasurementRecord::counts(settings, sample_counts(&dist, n, seed)?),
    })
}

/// Records at each of `settings`, drawing child `i` of `seed` for setting `i`.
pub fn simulate_records(
    sim: &Simulator,
    settings: &[[PauliLabel; QUBITS]],
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| simulate_record(sim, *s, shots, rng::child_seed(seed, i as u64)))
        .collect()
}

/// Expectation of the product of the per-party outcomes (+1 for bit 0),
/// skipping `mask`ed parties and identity labels, with the sign of
/// negated labels applied.
pub fn expectation(record: &MeasurementRecord, mask: [bool; QUBITS]) -> Result<f64> {
    let freq = record.frequencies()?;
    let mut sign = 1.0;
    let mut active = [false; QUBITS];
    for k in 0..QUBITS {
        let l = record.settings[k];
        active[k] = !mask[k] && !l.is_identity();
        if active[k] {
            sign *= l.sign();
        }
    }
    let mut e = 0.0;
    for (i, p) in freq.iter().enumerate() {
        let bits = index_bits(i);
        let parity = (0..QUBITS).filter(|&k| active[k] && bits[k] == 1).count();
        e += if parity % 2 == 0 { *p } else { -*p };
    }
    Ok(sign * e)
}

fn identity_mask(record: &MeasurementRecord) -> [bool; QUBITS] {
    record.settings.map(|l| l.is_identity())
}

/// Settings of the phase witness.
pub const PHASE_WITNESS_SETTINGS: [PauliLabel; QUBITS] = [
    PauliLabel::XPlusZ,
    PauliLabel::NegX,
    PauliLabel::X,
    PauliLabel::NegX,
];

/// Four-party expectation at [`PHASE_WITNESS_SETTINGS`]; `sqrt2/2 cos theta`
/// on the ideal state.
pub fn phase_witness(record: &MeasurementRecord) -> Result<f64> {
    if record.settings != PHASE_WITNESS_SETTINGS {
        return Err(Error::Settings(format!(
            "phase witness needs {:?}, got {:?}",
            PHASE_WITNESS_SETTINGS, record.settings
        )));
    }
    expectation(record, [false; QUBITS])
}

/// Stabilizer witness value and the fidelity bound it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub value: f64,
    pub fidelity_lower_bound: f64,
    /// `<g1>` with `g1 = X X X X`.
    pub g1: f64,
    /// `<prod_{k=2..4} (g_k + 1)/2>` with `g_k = -Z_{k-1} Z_k`.
    pub z_projector: f64,
}

/// `W = 3 - 2 [ (<g1> + 1)/2 + <prod_k (g_k + 1)/2> ]` from the all-X and
/// all-Z records; the product term is evaluated event by event.
pub fn stabilizer_witness(
    record_x: &MeasurementRecord,
    record_z: &MeasurementRecord,
) -> Result<WitnessResult> {
    if record_x.settings != [PauliLabel::X; QUBITS] {
        return Err(Error::Settings("witness needs an all-X record".into()));
    }
    if record_z.settings != [PauliLabel::Z; QUBITS] {
        return Err(Error::Settings("witness needs an all-Z record".into()));
    }
    let g1 = expectation(record_x, [false; QUBITS])?;
    let freq = record_z.frequencies()?;
    let z_projector: f64 = freq
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let b = index_bits(*i);
            (1..QUBITS).all(|k| b[k - 1] != b[k])
        })
        .map(|(_, p)| p)
        .sum();
    let value = 3.0 - 2.0 * ((g1 + 1.0) / 2.0 + z_projector);
    Ok(WitnessResult {
        value,
        fidelity_lower_bound: (1.0 - value) / 2.0,
        g1,
        z_projector,
    })
}

/// The eight settings of the Bell-like inequality, in the order
/// `M1 M1(2..4)`, `M0 M1(2..4)`, `M0 M0 M0 M0`, `M1 M0 M0 M0`.
pub fn bell_settings() -> [[PauliLabel; QUBITS]; 8] {
    use PauliLabel::*;
    [
        [XMinusZ, NegZ, I, I],
        [XMinusZ, I, Z, I],
        [XMinusZ, I, I, NegZ],
        [XPlusZ, NegZ, I, I],
        [XPlusZ, I, Z, I],
        [XPlusZ, I, I, NegZ],
        [XPlusZ, NegX, X, NegX],
        [XMinusZ, NegX, X, NegX],
    ]
}

/// Coefficients of the eight expectations in the Bell-like value.
pub const BELL_COEFFICIENTS: [f64; 8] = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0, 3.0];

/// Bell-like value (classical bound 6, quantum maximum `6 sqrt 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub value: f64,
    /// Expectations in [`bell_settings`] order.
    pub expectations: [f64; 8],
    pub standard_error: f64,
}

/// Evaluates the Bell-like value from records at the eight settings, in any order.
pub fn bell_value(records: &[MeasurementRecord]) -> Result<BellResult> {
    let settings = bell_settings();
    if records.len() != settings.len() {
        return Err(Error::Settings(format!(
            "expected 8 records, got {}",
            records.len()
        )));
    }
    let mut expectations = [0.0; 8];
    let mut variance = 0.0;
    for (k, s) in settings.iter().enumerate() {
        let matching: Vec<&MeasurementRecord> =
            records.iter().filter(|r| r.settings == *s).collect();
        let [r] = matching.as_slice() else {
            return Err(Error::Settings(format!("need exactly one record at {s:?}")));
        };
        let e = expectation(r, identity_mask(r))?;
        expectations[k] = e;
        if let Some(n) = r.shots() {
            variance += BELL_COEFFICIENTS[k].powi(2) * (1.0 - e * e).max(0.0) / n as f64;
        }
    }
    let value = BELL_COEFFICIENTS
        .iter()
        .zip(&expectations)
        .map(|(c, e)| c * e)
        .sum();
    Ok(BellResult {
        value,
        expectations,
        standard_error: variance.sqrt(),
    })
}
