//! Four-party secret sharing on the GHZ state: random X/Y bases, sifting
//! and dealer-bit inference from the other parties' parity.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{bits_index, index_bits, pauli_operator, PauliLabel, PureState, DIM, QUBITS};
use crate::rng;
use crate::simulator::Simulator;

/// QBER at or below which the key is considered secure.
pub const QBER_THRESHOLD: f64 = 0.11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    pub fn label(self) -> PauliLabel {
        match self {
            Basis::X => PauliLabel::X,
            Basis::Y => PauliLabel::Y,
        }
    }
}

/// One basis per party; party 1 is the dealer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisChoice(pub [Basis; QUBITS]);

impl BasisChoice {
    /// All 16 choices, bit `k` of the index selecting Y for party `k + 1`
    /// (party 1 most significant).
    pub fn all() -> [BasisChoice; 16] {
        std::array::from_fn(Self::from_index)
    }

    pub fn from_index(i: usize) -> BasisChoice {
        BasisChoice(index_bits(i & 15).map(|b| if b == 0 { Basis::X } else { Basis::Y }))
    }

    pub fn index(self) -> usize {
        bits_index(self.0.map(|b| (b == Basis::Y) as u8))
    }

    pub fn labels(self) -> [PauliLabel; QUBITS] {
        self.0.map(Basis::label)
    }
}

impl fmt::Display for BasisChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            f.write_str(match b {
                Basis::X => "x",
                Basis::Y => "y",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// All parties in the same basis.
    A,
    /// One party differs from the other three; discarded.
    B,
    /// Same-basis pairs are the correlated qubits {1,3} / {2,4}.
    C,
    /// Same-basis pairs are anti-correlated qubits.
    D,
}

impl Case {
    pub fn kept(self) -> bool {
        self != Case::B
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "a",
            Case::B => "b",
            Case::C => "c",
            Case::D => "d",
        })
    }
}

pub fn classify_bases(b: BasisChoice) -> Case {
    let xs: Vec<usize> = (0..QUBITS).filter(|&k| b.0[k] == Basis::X).collect();
    match xs.as_slice() {
        [] | [_, _, _, _] => Case::A,
        [0, 2] | [1, 3] => Case::C,
        [_, _] => Case::D,
        _ => Case::B,
    }
}

fn sign_table() -> &'static [i8; 16] {
    static TABLE: OnceLock<[i8; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let psi = PureState::ghz4(0.0);
        let v = psi.amplitudes();
        std::array::from_fn(|i| {
            let op = pauli_operator(&BasisChoice::from_index(i).labels()).expect("four labels");
            let e = (v.adjoint() * op * v)[(0, 0)].re;
            e.round() as i8
        })
    })
}

/// `<sigma_b1 ... sigma_b4>` on the ideal state: +1, -1 or 0.
pub fn combo_sign(b: BasisChoice) -> i8 {
    sign_table()[b.index()]
}

/// Dealer's bit from the outcomes of parties 2-4 (bit 1 is the -1 eigenstate).
pub fn infer_dealer_bit(bases: BasisChoice, others: [u8; 3]) -> Result<u8> {
    if !classify_bases(bases).kept() {
        return Err(Error::Protocol(format!(
            "bases {bases} carry no information on the dealer"
        )));
    }
    let parity = others.iter().fold(0, |acc, b| acc ^ (b & 1));
    Ok(parity ^ (combo_sign(bases) < 0) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub bases: BasisChoice,
    pub outcomes: [u8; QUBITS],
    pub case: Case,
    pub kept: bool,
    pub inferred: Option<u8>,
}

impl RoundRecord {
    pub fn actual(&self) -> u8 {
        self.outcomes[0]
    }

    pub fn is_error(&self) -> bool {
        self.inferred.is_some_and(|b| b != self.actual())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QssReport {
    pub raw_length: usize,
    pub sifted_length: usize,
    pub sift_rate: f64,
    pub qber: f64,
    pub secure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QssRun {
    pub report: QssReport,
    pub transcript: Vec<RoundRecord>,
}

/// Conditional outcome distributions of the simulator for all 16 choices.
pub fn basis_distributions(sim: &Simulator) -> Result<Vec<[f64; DIM]>> {
    BasisChoice::all()
        .par_iter()
        .map(|b| sim.measure(&b.labels())?.conditional())
        .collect()
}

fn draw(probs: &[f64; DIM], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total: take the last outcome with weight
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(DIM - 1)
}

/// Runs `rounds` protocol rounds; round `i` draws from child `i` of `seed`.
pub fn run_qss(sim: &Simulator, rounds: usize, seed: u64) -> Result<QssRun> {
    if rounds == 0 {
        return Err(Error::param("rounds", "need at least one round"));
    }
    let dists = basis_distributions(sim)?;
    let transcript: Vec<RoundRecord> = (0..rounds)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::child(seed, i as u64);
            let bases = BasisChoice::from_index(r.random_range(0..16));
            let o = draw(&dists[bases.index()], r.random::<f64>());
            let outcomes = index_bits(o);
            let case = classify_bases(bases);
            let inferred = if case.kept() {
                Some(infer_dealer_bit(
                    bases,
                    [outcomes[1], outcomes[2], outcomes[3]],
                )?)
            } else {
                None
            };
            Ok(RoundRecord {
                bases,
                outcomes,
                case,
                kept: case.kept(),
                inferred,
            })
        })
        .collect::<Result<_>>()?;
    let sifted = transcript.iter().filter(|r| r.kept).count();
    let errors = transcript.iter().filter(|r| r.is_error()).count();
    let qber = if sifted > 0 {
        errors as f64 / sifted as f64
    } else {
        0.0
    };
    Ok(QssRun {
        report: QssReport {
            raw_length: rounds,
            sifted_length: sifted,
            sift_rate: sifted as f64 / rounds as f64,
            qber,
            secure: qber <= QBER_THRESHOLD,
        },
        transcript,
    })
}

/// QBER in the limit of infinitely many rounds.
pub fn expected_qber(sim: &Simulator) -> Result<f64> {
    let dists = basis_distributions(sim)?;
    let mut total = 0.0;
    let mut kept = 0;
    for b in BasisChoice::all() {
        if !classify_bases(b).kept() {
            continue;
        }
        kept += 1;
        for (o, p) in dists[b.index()].iter().enumerate() {
            let bits = index_bits(o);
            if infer_dealer_bit(b, [bits[1], bits[2], bits[3]])? != bits[0] {
                total += p;
            }
        }
    }
    Ok(total / kept as f64)
}

pub fn transcript_csv(transcript: &[RoundRecord]) -> String {
    let mut out = String::from("round,bases,outcomes,case,kept,inferred,actual\n");
    for (i, r) in transcript.iter().enumerate() {
        let outcomes: String = r.outcomes.iter().map(|b| char::from(b'0' + b)).collect();
        let inferred = r.inferred.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{i},{},{outcomes},{},{},{inferred},{}\n",
            r.bases,
            r.case,
            r.kept,
            r.actual()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{kron_all, ComplexMatrix, C64};
    use crate::simulator::{NoiseModel, NoiseToggles};
    use std::collections::BTreeMap;

    fn choice(s: &str) -> BasisChoice {
        let v: Vec<Basis> = s
            .chars()
            .map(|c| if c == 'x' { Basis::X } else { Basis::Y })
            .collect();
        BasisChoice(v.try_into().unwrap())
    }

    // Outcome probabilities of the ideal state from spectral projectors.
    fn oracle(b: BasisChoice) -> [f64; DIM] {
        let psi = PureState::ghz4(0.0);
        let v = psi.amplitudes();
        std::array::from_fn(|o| {
            let bits = index_bits(o);
            let f: Vec<ComplexMatrix> = (0..QUBITS)
                .map(|k| {
                    let s = if bits[k] == 0 { 0.5 } else { -0.5 };
                    ComplexMatrix::identity(2, 2) * C64::new(0.5, 0.0)
                        + b.0[k].label().matrix() * C64::new(s, 0.0)
                })
                .collect();
            (v.adjoint() * kron_all(&f) * v)[(0, 0)].re
        })
    }

    #[test]
    fn examples() {
        assert_eq!(classify_bases(choice("xxxx")), Case::A);
        assert_eq!(classify_bases(choice("xyxy")), Case::C);
        assert_eq!(classify_bases(choice("xxyy")), Case::D);
        assert_eq!(combo_sign(choice("xxxx")), 1);
        assert_eq!(combo_sign(choice("xyxy")), -1);
        assert_eq!(combo_sign(choice("xyyy")), 0);
        assert_eq!(infer_dealer_bit(choice("xxxx"), [0, 0, 0]).unwrap(), 0);
        assert_eq!(infer_dealer_bit(choice("xyxy"), [0, 0, 0]).unwrap(), 1);
        assert_eq!(infer_dealer_bit(choice("xxyy"), [1, 0, 1]).unwrap(), 0);
        assert!(matches!(
            infer_dealer_bit(choice("xyyy"), [0, 0, 0]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn census() {
        let mut counts = BTreeMap::new();
        for b in BasisChoice::all() {
            *counts.entry(classify_bases(b)).or_insert(0) += 1;
        }
        assert_eq!(
            counts,
            BTreeMap::from([(Case::A, 2), (Case::B, 8), (Case::C, 2), (Case::D, 4)])
        );
        for b in BasisChoice::all() {
            let expected = match classify_bases(b) {
                Case::A | Case::D => 1,
                Case::C => -1,
                Case::B => 0,
            };
            assert_eq!(combo_sign(b), expected, "{b}");
            assert_eq!(BasisChoice::from_index(b.index()), b);
        }
    }

    #[test]
    fn inference_exact_on_ideal_state() {
        for b in BasisChoice::all()
            .into_iter()
            .filter(|b| classify_bases(*b).kept())
        {
            for (o, p) in oracle(b).iter().enumerate() {
                if *p > 1e-12 {
                    let bits = index_bits(o);
                    assert_eq!(
                        infer_dealer_bit(b, [bits[1], bits[2], bits[3]]).unwrap(),
                        bits[0],
                        "{b} {o}"
                    );
                }
            }
        }
    }

    #[test]
    fn case_b_reveals_nothing() {
        for b in BasisChoice::all()
            .into_iter()
            .filter(|b| classify_bases(*b) == Case::B)
        {
            let p = oracle(b);
            let mut mi = 0.0;
            let pa: [f64; 2] = std::array::from_fn(|a| (0..8).map(|r| p[a * 8 + r]).sum());
            let pr: [f64; 8] = std::array::from_fn(|r| p[r] + p[8 + r]);
            for a in 0..2 {
                for r in 0..8 {
                    let j = p[a * 8 + r];
                    if j > 0.0 {
                        mi += j * (j / (pa[a] * pr[r])).ln();
                    }
                }
            }
            assert!(mi.abs() < 1e-9, "{b}: {mi}");
        }
    }

    #[test]
    fn ideal_run() {
        let sim = Simulator::ideal(0.0);
        let run = run_qss(&sim, 10_000, 42).unwrap();
        let r = run.report;
        assert_eq!(r.qber, 0.0);
        let sigma = (0.25_f64 / 10_000.0).sqrt();
        assert!((r.sift_rate - 0.5).abs() < 5.0 * sigma, "{r:?}");
        assert!(r.secure);
        assert_eq!(run, run_qss(&sim, 10_000, 42).unwrap());
        for rec in &run.transcript {
            assert_eq!(rec.kept, rec.case != Case::B);
            assert_eq!(rec.kept, rec.inferred.is_some());
        }
        assert!(expected_qber(&sim).unwrap().abs() < 1e-12);
    }

    #[test]
    fn qber_grows_with_distinguishability() {
        let mut last = -1.0;
        for k in 0..5 {
            let mut model = NoiseModel::with_toggles(NoiseToggles::WITHOUT_DETECTORS);
            model.source.distinguishability_scale[1] = 1.0 - k as f64 / 4.0;
            let q = expected_qber(&model.simulator().unwrap()).unwrap();
            assert!(q >= last - 1e-12, "step {k}: {q} < {last}");
            last = q;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn csv_layout() {
        let run = run_qss(&Simulator::ideal(0.0), 20, 1).unwrap();
        let csv = transcript_csv(&run.transcript);
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("round,bases,outcomes,case,kept,inferred,actual\n"));
        assert!(run_qss(&Simulator::ideal(0.0), 0, 1).is_err());
    }
}
