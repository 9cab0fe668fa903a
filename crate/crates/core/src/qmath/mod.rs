//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Qubit registers use big-endian ordering: `|q1 q2 q3 q4>` sits at index
//! `q1*8 + q2*4 + q3*2 + q4`, so outcome `0101` is index 5 and `1010` is
//! index 10.

mod pauli;
mod permanent;
mod state;

pub use pauli::{pauli_operator, PauliLabel};
pub use permanent::permanent;
pub use state::{
    fidelity_to_pure, project_to_physical, purity, trace_distance, DensityMatrix, PureState,
};

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for unitaries and operators.
pub type ComplexMatrix = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Number of qubits in the chip register.
pub const QUBITS: usize = 4;
/// Hilbert-space dimension of the four-qubit register.
pub const DIM: usize = 16;

/// Frobenius norm of `U^dagger U - 1`.
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let prod = m.adjoint() * m;
    (prod - ComplexMatrix::identity(m.nrows(), m.ncols())).norm()
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    unitarity_defect(m) <= tol
}

/// Kronecker product of a list of matrices, left factor most significant.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::from_element(1, 1, ONE), |acc, f| {
            acc.kronecker(f)
        })
}

/// Bits of a four-qubit basis index, qubit 1 first.
pub fn index_bits(index: usize) -> [u8; QUBITS] {
    [
        ((index >> 3) & 1) as u8,
        ((index >> 2) & 1) as u8,
        ((index >> 1) & 1) as u8,
        (index & 1) as u8,
    ]
}

pub fn bits_index(bits: [u8; QUBITS]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Outcome label such as `"0101"`.
pub fn outcome_label(index: usize) -> String {
    index_bits(index)
        .iter()
        .map(|b| char::from(b'0' + b))
        .collect()
}
