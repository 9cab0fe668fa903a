//! Multi-photon scattering through the chip, threshold detection and
//! one-photon-per-qubit post-selection.
//!
//! Two routes give the same numbers. [`scatter_distribution`],
//! [`apply_detector_efficiency`] and [`threshold_and_postselect`] follow the
//! physics literally over sparse occupation maps. [`Simulator`] caches the
//! source enumeration and works directly on the 256 click patterns, which is
//! what every experiment uses.

mod clicks;
mod noise;
mod rate;

pub use noise::{NoiseModel, NoiseToggles, PARTY_BALANCE_ERRORS};
pub use rate::{coincidence_rate, LossBudget, RATE_DISCREPANCY_NOTE};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::chip::{
    full_unitary, setting_for_projector, MziSetting, PreparationStage, INPUT_MODES, MODES,
};
use crate::error::{Error, Result};
use crate::qmath::{outcome_label, permanent, ComplexMatrix, PauliLabel, DIM, QUBITS};
use crate::rng;
use crate::source::{
    enumerate_joint_inputs, JointInputTerm, JointInputs, MasterFractions, SourceSpec,
};

/// Largest photon number a term may carry (two per input).
pub const MAX_PHOTONS: usize = 8;

/// Photons per output mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeOccupation(pub [u8; MODES]);

impl ModeOccupation {
    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    /// Qubit outcome index when every mode pair has exactly one lit member.
    pub fn qubit_outcome(&self) -> Option<usize> {
        let mut index = 0;
        for k in 0..QUBITS {
            let (up, low) = (self.0[2 * k] > 0, self.0[2 * k + 1] > 0);
            let bit = match (up, low) {
                (true, false) => 0,
                (false, true) => 1,
                _ => return None,
            };
            index = (index << 1) | bit;
        }
        Some(index)
    }
}

/// Sparse distribution over output occupations.
pub type OccupationDistribution = BTreeMap<ModeOccupation, f64>;

/// Post-selected four-qubit outcome probabilities plus the rejected mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub probs: [f64; DIM],
    pub discard_mass: f64,
}

impl OutcomeDistribution {
    /// Probability that an event passes post-selection.
    pub fn success_probability(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Outcome probabilities conditioned on post-selection.
    pub fn conditional(&self) -> Result<[f64; DIM]> {
        let total = self.success_probability();
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(self.probs.map(|p| p / total))
    }

    /// `outcome,probability,conditional` rows in outcome order.
    pub fn to_csv(&self) -> String {
        let cond = self.conditional().unwrap_or([0.0; DIM]);
        let mut out = String::from("outcome,probability,conditional\n");
        for (i, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{},{:.15e},{:.15e}", outcome_label(i), p, cond[i]);
        }
        out
    }
}

/// Per-mode detection efficiencies of threshold detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiencies: [f64; MODES],
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::perfect()
    }
}

impl DetectorModel {
    pub fn perfect() -> Self {
        Self {
            efficiencies: [1.0; MODES],
        }
    }

    /// Detectors whose balance on a 50/50 split is off by `errors[k]` for
    /// party `k`: the upper detector is kept at 1 and the lower one reduced
    /// so the upper detector sees `0.5 + error` of the clicks.
    pub fn from_balance_errors(errors: [f64; QUBITS]) -> Result<Self> {
        let mut efficiencies = [1.0; MODES];
        for (k, e) in errors.iter().enumerate() {
            if !(0.0..0.5).contains(e) {
                return Err(Error::param(
                    "balance error",
                    format!("party {} error {e} outside [0, 0.5)", k + 1),
                ));
            }
            efficiencies[2 * k + 1] = (0.5 - e) / (0.5 + e);
        }
        Ok(Self { efficiencies })
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.efficiencies.iter().enumerate() {
            if !(*e > 0.0 && *e <= 1.0) {
                return Err(Error::param(
                    "efficiencies",
                    format!("detector {} has {e}, outside (0, 1]", k + 1),
                ));
            }
        }
        Ok(())
    }

    pub fn pair(&self, party: usize) -> (f64, f64) {
        (
            self.efficiencies[2 * party],
            self.efficiencies[2 * party + 1],
        )
    }
}

/// MZI settings measuring `labels`. Outcome bits always refer to the
/// unsigned observable, so `-X`/`-Z` use the `X`/`Z` settings and a masked
/// (identity) party is read out in `Z` and ignored.
pub fn measurement_settings(labels: &[PauliLabel; QUBITS]) -> Result<[MziSetting; QUBITS]> {
    let mut out = [MziSetting::new(0.0, 0.0); QUBITS];
    for (k, l) in labels.iter().enumerate() {
        let measured = if l.is_identity() {
            PauliLabel::Z
        } else {
            l.measured()
        };
        out[k] = setting_for_projector(measured)?;
    }
    Ok(out)
}

// All occupations of `n` photons over `modes` modes.
fn compositions(n: usize, modes: usize) -> Vec<Vec<u8>> {
    fn rec(left: usize, slot: usize, modes: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if slot + 1 == modes {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k as u8);
            rec(left - k, slot + 1, modes, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, modes, &mut Vec::with_capacity(modes), &mut out);
    out
}

fn factorial(n: u8) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// Output occupations of identical photons injected at `input_modes`
/// (repeats allowed), with `|perm U_{T,S}|^2 / (prod s! prod t!)` weights.
pub fn bosonic_distribution(
    u: &ComplexMatrix,
    input_modes: &[usize],
) -> Result<Vec<(Vec<u8>, f64)>> {
    let n = input_modes.len();
    let modes = u.nrows();
    if n == 0 {
        return Ok(vec![(vec![0; modes], 1.0)]);
    }
    let mut s_count = vec![0u8; u.ncols()];
    for &m in input_modes {
        if m >= u.ncols() {
            return Err(Error::dim(format!("input mode < {}", u.ncols()), m));
        }
        s_count[m] += 1;
    }
    let s_norm: f64 = s_count.iter().map(|&s| factorial(s)).product();
    let mut out = Vec::new();
    for occ in compositions(n, modes) {
        let rows: Vec<usize> = occ
            .iter()
            .enumerate()
            .flat_map(|(k, &t)| std::iter::repeat_n(k, t as usize))
            .collect();
        let sub = ComplexMatrix::from_fn(n, n, |r, c| u[(rows[r], input_modes[c])]);
        let t_norm: f64 = occ.iter().map(|&t| factorial(t)).product();
        let p = permanent(&sub)?.norm_sqr() / (s_norm * t_norm);
        if p > 0.0 {
            out.push((occ, p));
        }
    }
    Ok(out)
}

/// Output occupations for photons given as `(input mode, label)`; photons
/// with different labels do not interfere.
pub fn scatter_labelled(
    u: &ComplexMatrix,
    photons: &[(usize, u8)],
) -> Result<OccupationDistribution> {
    if photons.len() > MAX_PHOTONS {
        return Err(Error::Capacity(photons.len()));
    }
    if u.nrows() != MODES || u.ncols() != MODES {
        return Err(Error::dim(
            format!("{MODES}x{MODES}"),
            format!("{}x{}", u.nrows(), u.ncols()),
        ));
    }
    let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for &(mode, label) in photons {
        groups.entry(label).or_default().push(mode);
    }
    let mut acc: OccupationDistribution = BTreeMap::from([(ModeOccupation([0; MODES]), 1.0)]);
    for modes in groups.values() {
        let group = bosonic_distribution(u, modes)?;
        let mut next = OccupationDistribution::new();
        for (occ, p) in &acc {
            for (g, q) in &group {
                let mut o = occ.0;
                for k in 0..MODES {
                    o[k] += g[k];
                }
                *next.entry(ModeOccupation(o)).or_insert(0.0) += p * q;
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Output occupation distribution of one joint input term (weight ignored).
pub fn scatter_distribution(
    u: &ComplexMatrix,
    term: &JointInputTerm,
) -> Result<OccupationDistribution> {
    let photons: Vec<(usize, u8)> = term
        .photons()
        .into_iter()
        .map(|p| (INPUT_MODES[p.input], p.label))
        .collect();
    if photons.is_empty() {
        return Err(Error::param("term", "carries no photons"));
    }
    scatter_labelled(u, &photons)
}

fn binomial_pmf(n: u8, k: u8, p: f64) -> f64 {
    let c = factorial(n) / (factorial(k) * factorial(n - k));
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Independent binomial thinning of every mode.
pub fn apply_detector_efficiency(
    dist: &OccupationDistribution,
    det: &DetectorModel,
) -> OccupationDistribution {
    let mut acc = OccupationDistribution::new();
    for (occ, p) in dist {
        let mut partial: Vec<([u8; MODES], f64)> = vec![([0; MODES], *p)];
        for k in 0..MODES {
            let n = occ.0[k];
            if n == 0 {
                continue;
            }
            let eta = det.efficiencies[k];
            let mut next = Vec::with_capacity(partial.len() * (n as usize + 1));
            for (o, q) in &partial {
                for m in 0..=n {
                    let w = binomial_pmf(n, m, eta);
                    if w > 0.0 {
                        let mut o2 = *o;
                        o2[k] = m;
                        next.push((o2, q * w));
                    }
                }
            }
            partial = next;
        }
        for (o, q) in partial {
            *acc.entry(ModeOccupation(o)).or_insert(0.0) += q;
        }
    }
    acc
}

/// Threshold detection with exactly one click per qubit mode pair.
pub fn threshold_and_postselect(dist: &OccupationDistribution) -> OutcomeDistribution {
    let mut probs = [0.0; DIM];
    let mut discard_mass = 0.0;
    for (occ, p) in dist {
        match occ.qubit_outcome() {
            Some(i) => probs[i] += p,
            None => discard_mass += p,
        }
    }
    OutcomeDistribution {
        probs,
        discard_mass,
    }
}

/// Chip, source and detectors with the source enumeration cached.
#[derive(Debug, Clone)]
pub struct Simulator {
    inputs: JointInputs,
    stage: PreparationStage,
    detectors: DetectorModel,
}

impl Simulator {
    pub fn new(
        spec: &SourceSpec,
        fractions: &MasterFractions,
        stage: PreparationStage,
        detectors: DetectorModel,
    ) -> Result<Self> {
        stage.validate()?;
        detectors.validate()?;
        let inputs = enumerate_joint_inputs(spec, fractions)?;
        if inputs.terms.is_empty() {
            return Err(Error::Degenerate(
                "source produces no four-photon input".into(),
            ));
        }
        Ok(Self {
            inputs,
            stage,
            detectors,
        })
    }

    /// Perfect source, ideal stage with state phase `theta`, perfect detectors.
    pub fn ideal(theta: f64) -> Self {
        Self::new(
            &SourceSpec::ideal(),
            &MasterFractions::ones(),
            PreparationStage::with_state_phase(theta),
            DetectorModel::perfect(),
        )
        .expect("ideal configuration is valid")
    }

    pub fn inputs(&self) -> &JointInputs {
        &self.inputs
    }

    pub fn stage(&self) -> &PreparationStage {
        &self.stage
    }

    pub fn detectors(&self) -> &DetectorModel {
        &self.detectors
    }

    /// Outcome distribution at explicit MZI settings, normalised to the
    /// retained input weight.
    pub fn distribution(&self, settings: &[MziSetting; QUBITS]) -> Result<OutcomeDistribution> {
        let u = full_unitary(&self.stage, settings)?;
        clicks::outcome_distribution(&u, &self.inputs, &self.detectors)
    }

    /// Outcome distribution when measuring `labels` (see [`measurement_settings`]).
    pub fn measure(&self, labels: &[PauliLabel; QUBITS]) -> Result<OutcomeDistribution> {
        self.distribution(&measurement_settings(labels)?)
    }

    /// Same quantity as [`Simulator::distribution`] through the literal
    /// occupation pipeline; slow, kept as a cross-check.
    pub fn distribution_literal(
        &self,
        settings: &[MziSetting; QUBITS],
    ) -> Result<OutcomeDistribution> {
        let u = full_unitary(&self.stage, settings)?;
        let mut probs = [0.0; DIM];
        let mut discard_mass = 0.0;
        for term in &self.inputs.terms {
            let occ = scatter_distribution(&u, term)?;
            let out = threshold_and_postselect(&apply_detector_efficiency(&occ, &self.detectors));
            for (p, q) in probs.iter_mut().zip(out.probs) {
                *p += term.weight * q;
            }
            discard_mass += term.weight * out.discard_mass;
        }
        let w = self.inputs.retained_weight;
        Ok(OutcomeDistribution {
            probs: probs.map(|p| p / w),
            discard_mass: discard_mass / w,
        })
    }
}

/// End-to-end post-selected distribution for one configuration.
pub fn qubit_distribution(
    spec: &SourceSpec,
    fractions: &MasterFractions,
    stage: &PreparationStage,
    settings: &[MziSetting; QUBITS],
    det: &DetectorModel,
) -> Result<OutcomeDistribution> {
    Simulator::new(spec, fractions, *stage, *det)?.distribution(settings)
}

/// Multinomial draw of `shots` post-selected events.
pub fn sample_counts(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<[u64; DIM]> {
    let cond = dist.conditional()?;
    let mut rng = rng::from_seed(seed);
    let mut counts = [0u64; DIM];
    let mut left = shots;
    let mut mass = 1.0;
    for i in 0..DIM {
        if left == 0 {
            break;
        }
        if i == DIM - 1 || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let p = (cond[i] / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, p)
            .map_err(|e| Error::param("probability", e.to_string()))?
            .sample(&mut rng);
        counts[i] = k;
        left -= k;
        mass -= cond[i];
    }
    Ok(counts)
}
