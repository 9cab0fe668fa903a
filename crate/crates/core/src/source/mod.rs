//! Imperfect single-photon source: multiphoton emission, partial
//! distinguishability and balanced loss, expanded into a weighted list of
//! labelled multi-photon input states.

mod fit;

pub use fit::{fit_master_fractions, overlap_bounds, OverlapBounds};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of photons (inputs) fed to the chip.
pub const PHOTONS: usize = 4;

/// Photons named by the chip input they enter.
pub const PHOTON_NAMES: [char; PHOTONS] = ['A', 'B', 'C', 'D'];

/// Unordered photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pair {
    AB,
    AC,
    AD,
    BC,
    BD,
    CD,
}

impl Pair {
    pub const ALL: [Pair; 6] = [Pair::AB, Pair::AC, Pair::AD, Pair::BC, Pair::BD, Pair::CD];

    /// Pairs whose two-photon interference was measured directly.
    pub const MEASURABLE: [Pair; 4] = [Pair::AB, Pair::AC, Pair::BD, Pair::CD];

    pub fn indices(self) -> (usize, usize) {
        match self {
            Pair::AB => (0, 1),
            Pair::AC => (0, 2),
            Pair::AD => (0, 3),
            Pair::BC => (1, 2),
            Pair::BD => (1, 3),
            Pair::CD => (2, 3),
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.indices();
        write!(f, "{}{}", PHOTON_NAMES[i], PHOTON_NAMES[j])
    }
}

/// Mean wavepacket overlaps of the four measurable pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overlaps {
    pub ab: f64,
    pub ac: f64,
    pub bd: f64,
    pub cd: f64,
}

impl Default for Overlaps {
    fn default() -> Self {
        Self {
            ab: 0.924,
            ac: 0.915,
            bd: 0.881,
            cd: 0.921,
        }
    }
}

impl Overlaps {
    pub fn uniform(m: f64) -> Self {
        Self {
            ab: m,
            ac: m,
            bd: m,
            cd: m,
        }
    }

    pub fn entries(&self) -> Vec<(Pair, f64)> {
        vec![
            (Pair::AB, self.ab),
            (Pair::AC, self.ac),
            (Pair::BD, self.bd),
            (Pair::CD, self.cd),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (pair, m) in self.entries() {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::param(
                    "overlaps",
                    format!("M_{pair} = {m} outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

/// Source parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSpec {
    /// Second-order autocorrelation at zero delay.
    pub g2: f64,
    pub overlaps: Overlaps,
    /// End-to-end transmission of each photon.
    pub eta: f64,
    /// Multiplies each photon's master fraction (1 = unchanged).
    #[serde(default = "unit_scale")]
    pub distinguishability_scale: [f64; PHOTONS],
}

fn unit_scale() -> [f64; PHOTONS] {
    [1.0; PHOTONS]
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            g2: 0.005,
            overlaps: Overlaps::default(),
            eta: 0.039,
            distinguishability_scale: unit_scale(),
        }
    }
}

impl SourceSpec {
    /// Perfect, lossless, fully indistinguishable single photons.
    pub fn ideal() -> Self {
        Self {
            g2: 0.0,
            overlaps: Overlaps::uniform(1.0),
            eta: 1.0,
            distinguishability_scale: unit_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.g2) {
            return Err(Error::param("g2", format!("{} outside [0, 0.5)", self.g2)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("{} outside (0, 1]", self.eta)));
        }
        for (i, s) in self.distinguishability_scale.iter().enumerate() {
            if !(0.0..=1.0).contains(s) {
                return Err(Error::param(
                    "distinguishability_scale",
                    format!("photon {} has scale {s} outside [0, 1]", PHOTON_NAMES[i]),
                ));
            }
        }
        self.overlaps.validate()
    }
}

/// Photon-number populations of one emission event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionProbabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Populations with `p0 = 0` reproducing `g2 = 2 p2 / (p1 + 2 p2)^2`,
/// taking the smaller root (`p2 < 1/2` whenever `g2 < 4/9`).
pub fn solve_pair_probabilities(g2: f64) -> Result<EmissionProbabilities> {
    if !(0.0..0.5).contains(&g2) {
        return Err(Error::param("g2", format!("{g2} outside [0, 0.5)")));
    }
    // smaller root of g p^2 + 2(g - 1) p + g = 0, written without cancellation
    let p2 = g2 / ((1.0 - g2) + (1.0 - 2.0 * g2).sqrt());
    Ok(EmissionProbabilities {
        p0: 0.0,
        p1: 1.0 - p2,
        p2,
    })
}

/// Probability that each photon occupies the shared master internal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterFractions(pub [f64; PHOTONS]);

impl MasterFractions {
    pub fn ones() -> Self {
        Self([1.0; PHOTONS])
    }

    pub fn overlap(&self, pair: Pair) -> f64 {
        let (i, j) = pair.indices();
        self.0[i] * self.0[j]
    }
}

/// State of the light leaving one source slot towards one chip input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    Vacuum,
    Master,
    Distinguishable,
    Noise,
    MasterPair,
    DistinguishablePair,
}

impl InputState {
    pub const ALL: [InputState; 6] = [
        InputState::Vacuum,
        InputState::Master,
        InputState::Distinguishable,
        InputState::Noise,
        InputState::MasterPair,
        InputState::DistinguishablePair,
    ];

    pub fn photon_count(self) -> usize {
        match self {
            InputState::Vacuum => 0,
            InputState::Master | InputState::Distinguishable | InputState::Noise => 1,
            InputState::MasterPair | InputState::DistinguishablePair => 2,
        }
    }

    /// Internal-state labels of the photons carried on `input`.
    pub fn labels(self, input: usize) -> Vec<u8> {
        match self {
            InputState::Vacuum => vec![],
            InputState::Master => vec![MASTER],
            InputState::Distinguishable => vec![distinguishable_label(input)],
            InputState::Noise => vec![noise_label(input)],
            InputState::MasterPair => vec![MASTER, noise_label(input)],
            InputState::DistinguishablePair => {
                vec![distinguishable_label(input), noise_label(input)]
            }
        }
    }
}

/// Internal state shared by all master photons.
pub const MASTER: u8 = 0;

pub fn distinguishable_label(input: usize) -> u8 {
    1 + input as u8
}

pub fn noise_label(input: usize) -> u8 {
    1 + PHOTONS as u8 + input as u8
}

/// One photon: the chip input it enters and its internal-state label.
/// Photons interfere only when their labels are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Photon {
    pub input: usize,
    pub label: u8,
}

/// Weighted product of per-input states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointInputTerm {
    pub weight: f64,
    pub inputs: [InputState; PHOTONS],
}

impl JointInputTerm {
    pub fn photon_count(&self) -> usize {
        self.inputs.iter().map(|s| s.photon_count()).sum()
    }

    pub fn photons(&self) -> Vec<Photon> {
        self.inputs
            .iter()
            .enumerate()
            .flat_map(|(input, s)| {
                s.labels(input)
                    .into_iter()
                    .map(move |label| Photon { input, label })
            })
            .collect()
    }
}

/// Pruned joint-input enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointInputs {
    pub terms: Vec<JointInputTerm>,
    /// Size of the product before pruning.
    pub raw_count: usize,
    /// Total weight of `terms`.
    pub retained_weight: f64,
}

/// Terms lighter than this fraction of the heaviest four-photon term are dropped.
pub const PRUNE_RATIO: f64 = 1e-8;

/// Six-term mixture of the light entering `input`.
pub fn input_mixture(
    spec: &SourceSpec,
    fractions: &MasterFractions,
    input: usize,
) -> Result<Vec<(f64, InputState)>> {
    if input >= PHOTONS {
        return Err(Error::param(
            "input",
            format!("{input} is not a chip input"),
        ));
    }
    let EmissionProbabilities { p1, p2, .. } = solve_pair_probabilities(spec.g2)?;
    let eta = spec.eta;
    let x = fractions.0[input] * spec.distinguishability_scale[input];
    let one = eta * p1 + eta * (1.0 - eta) * p2;
    Ok(vec![
        (
            1.0 - (eta * p1 + eta * eta * p2 + 2.0 * eta * (1.0 - eta) * p2),
            InputState::Vacuum,
        ),
        (x * one, InputState::Master),
        ((1.0 - x) * one, InputState::Distinguishable),
        (eta * (1.0 - eta) * p2, InputState::Noise),
        (eta * eta * x * p2, InputState::MasterPair),
        (eta * eta * (1.0 - x) * p2, InputState::DistinguishablePair),
    ])
}

/// Product of the four input mixtures, keeping terms with at least four
/// photons and weight above [`PRUNE_RATIO`] of the heaviest such term.
pub fn enumerate_joint_inputs(
    spec: &SourceSpec,
    fractions: &MasterFractions,
) -> Result<JointInputs> {
    spec.validate()?;
    let mixtures = (0..PHOTONS)
        .map(|i| input_mixture(spec, fractions, i))
        .collect::<Result<Vec<_>>>()?;
    let mut raw = Vec::with_capacity(6usize.pow(PHOTONS as u32));
    for &(wa, a) in &mixtures[0] {
        for &(wb, b) in &mixtures[1] {
            for &(wc, c) in &mixtures[2] {
                for &(wd, d) in &mixtures[3] {
                    raw.push(JointInputTerm {
                        weight: wa * wb * wc * wd,
                        inputs: [a, b, c, d],
                    });
                }
            }
        }
    }
    let raw_count = raw.len();
    let candidates: Vec<JointInputTerm> = raw
        .into_iter()
        .filter(|t| t.photon_count() >= PHOTONS && t.weight > 0.0)
        .collect();
    let heaviest = candidates.iter().map(|t| t.weight).fold(0.0, f64::max);
    let terms: Vec<JointInputTerm> = candidates
        .into_iter()
        .filter(|t| t.weight >= PRUNE_RATIO * heaviest)
        .collect();
    let retained_weight = terms.iter().map(|t| t.weight).sum();
    log::debug!(
        "joint inputs: {} of {raw_count} terms retained",
        terms.len()
    );
    Ok(JointInputs {
        terms,
        raw_count,
        retained_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // substitution oracle: 2 p2 = g (1 + p2)^2 when p1 = 1 - p2
    fn residual(g2: f64, p: &EmissionProbabilities) -> f64 {
        2.0 * p.p2 / (p.p1 + 2.0 * p.p2).powi(2) - g2
    }

    #[test]
    fn pair_probabilities() {
        let p = solve_pair_probabilities(0.0).unwrap();
        assert_eq!((p.p0, p.p1, p.p2), (0.0, 1.0, 0.0));
        // the p2 < 1/2 branch exists for g2 < 4/9
        for g in [0.005, 0.012, 0.2, 0.44] {
            let p = solve_pair_probabilities(g).unwrap();
            assert!(residual(g, &p).abs() < 1e-12);
            assert!((p.p1 + p.p2 - 1.0).abs() < 1e-15);
            assert!(p.p2 >= 0.0 && p.p2 < 0.5);
        }
        // textbook quadratic formula, independently
        let g: f64 = 0.005;
        let (a, b, c) = (g, 2.0 * g - 2.0, g);
        let root = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((solve_pair_probabilities(g).unwrap().p2 - root).abs() < 1e-12);
        assert!((root - 2.5126e-3).abs() < 1e-6);
        assert!((solve_pair_probabilities(0.012).unwrap().p2 - 6.07e-3).abs() < 1e-5);
        assert!(solve_pair_probabilities(0.5).is_err());
        assert!(solve_pair_probabilities(-0.1).is_err());
    }

    #[test]
    fn mixture_limits() {
        let m = input_mixture(&SourceSpec::ideal(), &MasterFractions::ones(), 0).unwrap();
        let nonzero: Vec<_> = m.iter().filter(|(w, _)| *w > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(*nonzero[0], (1.0, InputState::Master));

        let spec = SourceSpec {
            eta: 0.0,
            ..SourceSpec::default()
        };
        let m = input_mixture(&spec, &MasterFractions::ones(), 2).unwrap();
        assert_eq!(m[0], (1.0, InputState::Vacuum));
        assert!(m[1..].iter().all(|(w, _)| *w == 0.0));
    }

    #[test]
    fn mixture_paper_values() {
        let spec = SourceSpec::default();
        let fr = MasterFractions([0.95; 4]);
        let m = input_mixture(&spec, &fr, 1).unwrap();
        let p = solve_pair_probabilities(0.005).unwrap();
        let expected = 0.039 * 0.95 * p.p1 + 0.039 * 0.961 * 0.95 * p.p2;
        assert!((m[1].0 - expected).abs() < 1e-15);
        let total: f64 = m.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_enumeration() {
        let e = enumerate_joint_inputs(&SourceSpec::ideal(), &MasterFractions::ones()).unwrap();
        assert_eq!(e.raw_count, 1296);
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.terms[0].inputs, [InputState::Master; 4]);
        assert!((e.terms[0].weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_multiphoton_keeps_sixteen_terms() {
        let spec = SourceSpec {
            g2: 0.0,
            eta: 0.3,
            ..SourceSpec::default()
        };
        let e = enumerate_joint_inputs(&spec, &MasterFractions([0.9, 0.8, 0.95, 0.7])).unwrap();
        assert_eq!(e.terms.len(), 16);
        for t in &e.terms {
            assert!(t
                .inputs
                .iter()
                .all(|s| matches!(s, InputState::Master | InputState::Distinguishable)));
        }
    }

    #[test]
    fn paper_enumeration_keeps_multiphoton_terms() {
        let e =
            enumerate_joint_inputs(&SourceSpec::default(), &MasterFractions([0.97; 4])).unwrap();
        assert!(e.terms.iter().any(|t| t.photon_count() == 5));
        assert!(e
            .terms
            .iter()
            .any(|t| t.inputs.contains(&InputState::Vacuum)));
        assert!(e.terms.iter().all(|t| t.photon_count() >= 4));
    }

    #[test]
    fn labels_follow_orthogonality_rules() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..PHOTONS {
            assert!(seen.insert(distinguishable_label(i)));
            assert!(seen.insert(noise_label(i)));
        }
        assert!(!seen.contains(&MASTER));
        let t = JointInputTerm {
            weight: 1.0,
            inputs: [
                InputState::MasterPair,
                InputState::Vacuum,
                InputState::DistinguishablePair,
                InputState::Noise,
            ],
        };
        let ph = t.photons();
        assert_eq!(ph.len(), t.photon_count());
        assert_eq!(
            ph[0],
            Photon {
                input: 0,
                label: MASTER
            }
        );
        assert_ne!(ph[0].label, ph[1].label);
        assert_ne!(ph[2].label, ph[3].label);
    }

    #[test]
    fn invalid_spec() {
        let mut s = SourceSpec::default();
        s.overlaps.ab = 1.2;
        assert!(s.validate().is_err());
        let s = SourceSpec {
            eta: 0.0,
            ..SourceSpec::default()
        };
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn mixture_is_a_distribution(
            g2 in 0.0f64..0.49,
            eta in 0.0f64..=1.0,
            x in 0.0f64..=1.0,
            scale in 0.0f64..=1.0,
        ) {
            let spec = SourceSpec { g2, eta, distinguishability_scale: [scale; 4], ..SourceSpec::default() };
            let m = input_mixture(&spec, &MasterFractions([x; 4]), 3).unwrap();
            let total: f64 = m.iter().map(|(w, _)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(m.iter().all(|(w, _)| *w >= -1e-15));
        }

        #[test]
        fn raw_product_sums_to_one(g2 in 0.0f64..0.3, eta in 0.01f64..=1.0, x in 0.0f64..=1.0) {
            let spec = SourceSpec { g2, eta, ..SourceSpec::default() };
            let fr = MasterFractions([x, 1.0 - x / 2.0, x, 0.5]);
            let mixtures: Vec<_> = (0..4).map(|i| input_mixture(&spec, &fr, i).unwrap()).collect();
            let total: f64 = mixtures.iter().map(|m| m.iter().map(|(w, _)| w).sum::<f64>()).product();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
