use nalgebra::{DVector, SymmetricEigen};

use super::{ComplexMatrix, C64, DIM, ONE, ZERO};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-10;

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: DVector<C64>,
}

impl PureState {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::param(
                "amplitudes",
                format!("squared norm {norm2} is not 1"),
            ));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let n = amps.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amps: amps / C64::new(n, 0.0),
        })
    }

    /// `(|0101> + e^{i theta} |1010>) / sqrt 2`.
    pub fn ghz4(theta: f64) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = DVector::from_element(DIM, ZERO);
        amps[0b0101] = C64::new(r, 0.0);
        amps[0b1010] = C64::from_polar(r, theta);
        Self { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::dim(format!("index < {dim}"), index));
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.amps * self.amps.adjoint(),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity, trace and positivity to within 1e-10.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::dim(
                "non-empty square matrix",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        let herm = (&m - m.adjoint()).norm();
        if herm > DENSITY_TOL {
            return Err(Error::param(
                "density matrix",
                format!("not Hermitian (defect {herm:e})"),
            ));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::param(
                "density matrix",
                format!("trace {tr} is not 1"),
            ));
        }
        let min_eig = hermitian_eigen(&m).eigenvalues.min();
        if min_eig < -DENSITY_TOL {
            return Err(Error::param(
                "density matrix",
                format!("negative eigenvalue {min_eig:e}"),
            ));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    /// Equal-weight mixture `sum_k w_k |psi_k><psi_k|`; weights must sum to 1.
    pub fn mixture(terms: &[(f64, PureState)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, s)| s.dim())
            .ok_or_else(|| Error::Degenerate("empty mixture".into()))?;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (w, s) in terms {
            if s.dim() != dim {
                return Err(Error::dim(dim, s.dim()));
            }
            m += s.projector().m * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_eigen(&self.m)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Skips validation; for matrices that are physical by construction.
    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        Self { m }
    }
}

fn hermitian_eigen(m: &ComplexMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    // symmetrize so round-off asymmetry never leaks into the eigensolver
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h)
}

/// `<psi| rho |psi>`.
pub fn fidelity_to_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::dim(rho.dim(), psi.dim()));
    }
    let v = psi.amplitudes();
    let f = (v.adjoint() * &rho.m * v)[(0, 0)];
    if f.im.abs() > 1e-10 {
        return Err(Error::Degenerate(format!(
            "fidelity has imaginary part {:e}",
            f.im
        )));
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    rho.m.iter().map(|z| z.norm_sqr()).sum()
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    let eig = hermitian_eigen(&(a - b));
    Ok(0.5 * eig.eigenvalues.iter().map(|e| e.abs()).sum::<f64>())
}

/// Nearest physical state: clamps negative eigenvalues and renormalizes.
pub fn project_to_physical(h: &ComplexMatrix) -> Result<DensityMatrix> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::dim(
            "non-empty square matrix",
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let herm = (h - h.adjoint()).norm();
    if herm > 1e-8 {
        return Err(Error::param(
            "matrix",
            format!("not Hermitian (defect {herm:e})"),
        ));
    }
    let eig = hermitian_eigen(h);
    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= f64::EPSILON {
        return Err(Error::Degenerate(
            "no positive spectrum left after clamping".into(),
        ));
    }
    let vecs = &eig.eigenvectors;
    let n = h.nrows();
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in clamped.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let v = vecs.column(k);
        m += (v * v.adjoint()) * C64::new(lambda / total, 0.0);
    }
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ghz_projector() -> DensityMatrix {
        PureState::ghz4(0.0).projector()
    }

    #[test]
    fn fidelity_cases() {
        let psi = PureState::ghz4(0.0);
        assert!((fidelity_to_pure(&ghz_projector(), &psi).unwrap() - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(16);
        assert!((fidelity_to_pure(&mixed, &psi).unwrap() - 1.0 / 16.0).abs() < 1e-14);
        let small = DensityMatrix::maximally_mixed(2);
        assert!(fidelity_to_pure(&small, &psi).is_err());
    }

    #[test]
    fn purity_cases() {
        assert!((purity(&ghz_projector()) - 1.0).abs() < 1e-14);
        assert!((purity(&DensityMatrix::maximally_mixed(16)) - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn density_validation() {
        let bad = ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.5, 0.0), ZERO, ZERO, C64::new(-0.5, 0.0)],
        );
        assert!(DensityMatrix::new(bad).is_err());
        let nonherm = ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), ONE, ZERO, C64::new(0.5, 0.0)],
        );
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!(DensityMatrix::new(ghz_projector().m).is_ok());
    }

    #[test]
    fn projection_clamps() {
        let h = ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.5, 0.0), ZERO, ZERO, C64::new(-0.5, 0.0)],
        );
        let rho = project_to_physical(&h).unwrap();
        let expected = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!((rho.matrix() - expected).norm() < 1e-12);

        let zero = ComplexMatrix::zeros(2, 2);
        assert!(matches!(
            project_to_physical(&zero),
            Err(Error::Degenerate(_))
        ));
        let neg = ComplexMatrix::identity(2, 2) * C64::new(-1.0, 0.0);
        assert!(project_to_physical(&neg).is_err());
    }

    #[test]
    fn projection_is_idempotent_on_states() {
        let rho = ghz_projector();
        let out = project_to_physical(rho.matrix()).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(16);
        let out = project_to_physical(mixed.matrix()).unwrap();
        assert!((out.matrix() - mixed.matrix()).norm() < 1e-12);
    }

    fn hermitian_strategy(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let a =
                ComplexMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im)));
            (&a + a.adjoint()) * C64::new(0.5, 0.0)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn small_perturbation_stays_close(delta in hermitian_strategy(16)) {
            let target = ghz_projector();
            let scale = 1e-3 / delta.norm();
            let h = target.matrix() + &delta * C64::new(scale, 0.0);
            let rho = project_to_physical(&h).unwrap();
            prop_assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
            let d = trace_distance(rho.matrix(), target.matrix()).unwrap();
            prop_assert!(d < 2e-3, "trace distance {d}");
        }

        #[test]
        fn projection_is_idempotent(h in hermitian_strategy(4)) {
            let shifted = &h + ComplexMatrix::identity(4, 4) * C64::new(4.0, 0.0);
            let once = project_to_physical(&shifted).unwrap();
            let twice = project_to_physical(once.matrix()).unwrap();
            prop_assert!((once.matrix() - twice.matrix()).norm() < 1e-12);
            prop_assert!((once.matrix().trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fidelity_in_unit_interval(h in hermitian_strategy(16), theta in -3.2f64..3.2) {
            let shifted = &h + ComplexMatrix::identity(16, 16) * C64::new(0.5, 0.0);
            let rho = project_to_physical(&shifted).unwrap();
            let f = fidelity_to_pure(&rho, &PureState::ghz4(theta)).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
