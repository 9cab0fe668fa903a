//! Click-pattern route: each label group becomes a distribution over the
//! 256 detector click masks, groups combine by OR, and post-selection reads
//! the mask.

use super::{bosonic_distribution, DetectorModel, OutcomeDistribution};
use crate::chip::{INPUT_MODES, MODES};
use crate::error::Result;
use crate::qmath::{ComplexMatrix, DIM, QUBITS};
use crate::source::{InputState, JointInputs, PHOTONS};

const MASKS: usize = 1 << MODES;

type Clicks = [f64; MASKS];

// Click-mask distribution of identical photons at `modes` after thinning.
fn group_clicks(u: &ComplexMatrix, modes: &[usize], det: &DetectorModel) -> Result<Clicks> {
    let mut out = [0.0; MASKS];
    for (occ, p) in bosonic_distribution(u, modes)? {
        let mut partial = vec![(0usize, p)];
        for (k, &n) in occ.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let miss = (1.0 - det.efficiencies[k]).powi(n as i32);
            partial = partial
                .into_iter()
                .flat_map(|(m, q)| [(m | (1 << k), q * (1.0 - miss)), (m, q * miss)])
                .collect();
        }
        for (m, q) in partial {
            out[m] += q;
        }
    }
    Ok(out)
}

fn or_convolve(a: &Clicks, b: &Clicks) -> Clicks {
    let support: Vec<(usize, f64)> = b
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, q)| *q != 0.0)
        .collect();
    let mut out = [0.0; MASKS];
    for (m, &p) in a.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(n, q) in &support {
            out[m | n] += p * q;
        }
    }
    out
}

fn outcome_of(mask: usize) -> Option<usize> {
    let mut index = 0;
    for k in 0..QUBITS {
        let bit = match (mask >> (2 * k)) & 0b11 {
            0b01 => 0,
            0b10 => 1,
            _ => return None,
        };
        index = (index << 1) | bit;
    }
    Some(index)
}

pub(super) fn outcome_distribution(
    u: &ComplexMatrix,
    inputs: &JointInputs,
    det: &DetectorModel,
) -> Result<OutcomeDistribution> {
    // master photons interfere with each other; cache by input subset
    let mut master: Vec<Option<Clicks>> = vec![None; 1 << PHOTONS];
    let singles: Vec<Clicks> = INPUT_MODES
        .iter()
        .map(|&m| group_clicks(u, &[m], det))
        .collect::<Result<_>>()?;

    let mut probs = [0.0; DIM];
    let mut discard = 0.0;
    for term in &inputs.terms {
        let mut subset = 0usize;
        let mut lone = Vec::with_capacity(2 * PHOTONS);
        for (i, s) in term.inputs.iter().enumerate() {
            match s {
                InputState::Vacuum => {}
                InputState::Master => subset |= 1 << i,
                InputState::MasterPair => {
                    subset |= 1 << i;
                    lone.push(i);
                }
                InputState::Distinguishable | InputState::Noise => lone.push(i),
                InputState::DistinguishablePair => {
                    lone.push(i);
                    lone.push(i);
                }
            }
        }
        if master[subset].is_none() {
            let modes: Vec<usize> = (0..PHOTONS)
                .filter(|i| subset >> i & 1 == 1)
                .map(|i| INPUT_MODES[i])
                .collect();
            master[subset] = Some(group_clicks(u, &modes, det)?);
        }
        let mut acc = master[subset].expect("filled above");
        for &i in &lone {
            acc = or_convolve(&acc, &singles[i]);
        }
        for (m, p) in acc.iter().enumerate() {
            match outcome_of(m) {
                Some(o) => probs[o] += term.weight * p,
                None => discard += term.weight * p,
            }
        }
    }
    let w = inputs.retained_weight;
    Ok(OutcomeDistribution {
        probs: probs.map(|p| p / w),
        discard_mass: discard / w,
    })
}
