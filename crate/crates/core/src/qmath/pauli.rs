use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{kron_all, ComplexMatrix, C64, I, ONE, ZERO};
use crate::error::{Error, Result};

/// Single-qubit observable used as a measurement setting.
///
/// Every non-identity label is Hermitian with eigenvalues +1 and -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliLabel {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "-z")]
    NegZ,
    /// `(X + Z) / sqrt 2`
    #[serde(rename = "x+z")]
    XPlusZ,
    /// `(X - Z) / sqrt 2`
    #[serde(rename = "x-z")]
    XMinusZ,
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 8] = [
        PauliLabel::I,
        PauliLabel::X,
        PauliLabel::Y,
        PauliLabel::Z,
        PauliLabel::NegX,
        PauliLabel::NegZ,
        PauliLabel::XPlusZ,
        PauliLabel::XMinusZ,
    ];

    pub fn is_identity(self) -> bool {
        self == PauliLabel::I
    }

    /// -1 for the negated labels, +1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            PauliLabel::NegX | PauliLabel::NegZ => -1.0,
            _ => 1.0,
        }
    }

    /// The positive-sign observable whose eigenbasis is physically measured.
    ///
    /// Outcome bit 0 always denotes the +1 eigenvector of this observable;
    /// the sign of `-X`/`-Z` is applied when forming expectation values.
    pub fn measured(self) -> PauliLabel {
        match self {
            PauliLabel::NegX => PauliLabel::X,
            PauliLabel::NegZ => PauliLabel::Z,
            other => other,
        }
    }

    /// 2x2 matrix of the signed observable.
    pub fn matrix(self) -> ComplexMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b, c, d) = match self {
            PauliLabel::I => (ONE, ZERO, ZERO, ONE),
            PauliLabel::X => (ZERO, ONE, ONE, ZERO),
            PauliLabel::Y => (ZERO, -I, I, ZERO),
            PauliLabel::Z => (ONE, ZERO, ZERO, -ONE),
            PauliLabel::NegX => (ZERO, -ONE, -ONE, ZERO),
            PauliLabel::NegZ => (-ONE, ZERO, ZERO, ONE),
            PauliLabel::XPlusZ => (
                C64::new(r, 0.0),
                C64::new(r, 0.0),
                C64::new(r, 0.0),
                C64::new(-r, 0.0),
            ),
            PauliLabel::XMinusZ => (
                C64::new(-r, 0.0),
                C64::new(r, 0.0),
                C64::new(r, 0.0),
                C64::new(r, 0.0),
            ),
        };
        ComplexMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    /// Eigenvector of the measured observable for outcome bit `bit`
    /// (0 for eigenvalue +1, 1 for eigenvalue -1). Identity is treated as Z.
    pub fn eigenvector(self, bit: u8) -> [C64; 2] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (c8, s8) = (
            (std::f64::consts::PI / 8.0).cos(),
            (std::f64::consts::PI / 8.0).sin(),
        );
        match (self.measured(), bit) {
            (PauliLabel::X, 0) => [C64::new(r, 0.0), C64::new(r, 0.0)],
            (PauliLabel::X, _) => [C64::new(r, 0.0), C64::new(-r, 0.0)],
            (PauliLabel::Y, 0) => [C64::new(r, 0.0), C64::new(0.0, r)],
            (PauliLabel::Y, _) => [C64::new(r, 0.0), C64::new(0.0, -r)],
            (PauliLabel::XPlusZ, 0) => [C64::new(c8, 0.0), C64::new(s8, 0.0)],
            (PauliLabel::XPlusZ, _) => [C64::new(s8, 0.0), C64::new(-c8, 0.0)],
            (PauliLabel::XMinusZ, 0) => [C64::new(s8, 0.0), C64::new(c8, 0.0)],
            (PauliLabel::XMinusZ, _) => [C64::new(c8, 0.0), C64::new(-s8, 0.0)],
            (_, 0) => [ONE, ZERO],
            (_, _) => [ZERO, ONE],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PauliLabel::I => "i",
            PauliLabel::X => "x",
            PauliLabel::Y => "y",
            PauliLabel::Z => "z",
            PauliLabel::NegX => "-x",
            PauliLabel::NegZ => "-z",
            PauliLabel::XPlusZ => "x+z",
            PauliLabel::XMinusZ => "x-z",
        }
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(' ', "");
        PauliLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or_else(|| Error::param("pauli label", format!("unknown label `{s}`")))
    }
}

/// Kronecker product of the single-qubit observables, qubit 1 most significant.
pub fn pauli_operator(labels: &[PauliLabel]) -> Result<ComplexMatrix> {
    if labels.is_empty() {
        return Err(Error::param("labels", "at least one qubit is required"));
    }
    let factors: Vec<_> = labels.iter().map(|l| l.matrix()).collect();
    Ok(kron_all(&factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::PureState;

    #[test]
    fn z_is_diagonal() {
        let z = pauli_operator(&[PauliLabel::Z]).unwrap();
        assert_eq!(z[(0, 0)], ONE);
        assert_eq!(z[(1, 1)], -ONE);
        assert_eq!(z[(0, 1)], ZERO);
    }

    #[test]
    fn labels_are_hermitian_involutions() {
        for l in PauliLabel::ALL {
            let m = l.matrix();
            assert!((m.adjoint() - &m).norm() < 1e-15, "{l}");
            assert!(
                (&m * &m - ComplexMatrix::identity(2, 2)).norm() < 1e-15,
                "{l}"
            );
        }
    }

    #[test]
    fn eigenvectors_match_matrices() {
        for l in PauliLabel::ALL.into_iter().filter(|l| !l.is_identity()) {
            let m = l.measured().matrix();
            for bit in 0..2u8 {
                let v = l.eigenvector(bit);
                let vec = nalgebra::DVector::from_row_slice(&v);
                let expected = if bit == 0 { 1.0 } else { -1.0 };
                let mv = &m * &vec;
                assert!(
                    (mv - vec * C64::new(expected, 0.0)).norm() < 1e-12,
                    "{l} bit {bit}"
                );
            }
        }
    }

    #[test]
    fn ghz_stabilizers() {
        let ghz = PureState::ghz4(0.0);
        let psi = ghz.amplitudes();
        let xxxx = pauli_operator(&[PauliLabel::X; 4]).unwrap();
        assert!((&xxxx * psi - psi).norm() < 1e-14);
        let g2 = pauli_operator(&[
            PauliLabel::NegZ,
            PauliLabel::Z,
            PauliLabel::I,
            PauliLabel::I,
        ])
        .unwrap();
        assert!((&g2 * psi - psi).norm() < 1e-14);
    }

    #[test]
    fn parses_labels() {
        assert_eq!("X+Z".parse::<PauliLabel>().unwrap(), PauliLabel::XPlusZ);
        assert_eq!("-z".parse::<PauliLabel>().unwrap(), PauliLabel::NegZ);
        assert!("w".parse::<PauliLabel>().is_err());
    }
}
