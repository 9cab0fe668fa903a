//! 81-setting Pauli tomography: linear inversion and maximum-likelihood
//! reconstruction over `rho = T^dag T / Tr(T^dag T)`, `T` lower triangular.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{expectation, simulate_records, MeasurementRecord, Tally};
use crate::error::{Error, Result};
use crate::qmath::{
    index_bits, outcome_label, pauli_operator, project_to_physical, ComplexMatrix, DensityMatrix,
    PauliLabel, C64, DIM, QUBITS,
};
use crate::rng;
use crate::simulator::Simulator;

const BASES: [PauliLabel; 3] = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
/// Number of real parameters of a lower-triangular 16x16 `T` with real diagonal.
const PARAMS: usize = DIM * DIM;

/// All `(x, y, z)^4` settings in lexicographic order, qubit 1 slowest.
pub fn tomography_settings() -> Vec<[PauliLabel; QUBITS]> {
    (0..81)
        .map(|mut i| {
            let mut s = [PauliLabel::X; QUBITS];
            for k in (0..QUBITS).rev() {
                s[k] = BASES[i % 3];
                i /= 3;
            }
            s
        })
        .collect()
}

/// One record per tomography setting, in [`tomography_settings`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographySet {
    records: Vec<MeasurementRecord>,
}

impl TomographySet {
    /// Accepts the 81 records in any order and sorts them.
    pub fn new(mut records: Vec<MeasurementRecord>) -> Result<Self> {
        let settings = tomography_settings();
        if records.len() != settings.len() {
            return Err(Error::Settings(format!(
                "expected 81 records, got {}",
                records.len()
            )));
        }
        let key = |r: &MeasurementRecord| settings.iter().position(|s| *s == r.settings);
        if records.iter().any(|r| key(r).is_none()) {
            return Err(Error::Settings(
                "record outside the (x, y, z)^4 settings".into(),
            ));
        }
        records.sort_by_key(|r| key(r));
        if records.windows(2).any(|w| w[0].settings == w[1].settings) {
            return Err(Error::Settings("duplicate tomography setting".into()));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn has_counts(&self) -> bool {
        self.records
            .iter()
            .all(|r| matches!(r.tally, Tally::Counts(_)))
    }
}

/// Full tomography of the simulated state; child `i` of `seed` drives setting `i`.
pub fn simulate_tomography(
    sim: &Simulator,
    shots: Option<u64>,
    seed: u64,
) -> Result<TomographySet> {
    TomographySet::new(simulate_records(sim, &tomography_settings(), shots, seed)?)
}

/// `(1/16) sum_P <P> P` over all 256 Pauli strings; identity factors are
/// traced out by masking, averaging over every compatible setting.
pub fn linear_inversion(ts: &TomographySet) -> Result<ComplexMatrix> {
    let paulis = [PauliLabel::I, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
    let mut rho = ComplexMatrix::zeros(DIM, DIM);
    for code in 0..256usize {
        let string: [PauliLabel; QUBITS] =
            std::array::from_fn(|k| paulis[(code >> (2 * (QUBITS - 1 - k))) & 3]);
        let mask = string.map(|l| l.is_identity());
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in &ts.records {
            if (0..QUBITS).all(|k| mask[k] || r.settings[k] == string[k]) {
                sum += expectation(r, mask)?;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Settings(format!("no record measures {string:?}")));
        }
        rho += pauli_operator(&string)? * C64::new(sum / n as f64 / DIM as f64, 0.0);
    }
    Ok(rho)
}

/// Stopping rules of [`mle_reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tolerance: f64,
    /// Weight of `I/16` mixed into the initial state so it has full rank.
    pub initial_mixing: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
            initial_mixing: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit first; `rho` is then the best iterate.
    pub converged: bool,
}

pub(super) struct Likelihood {
    projectors: Vec<DVector<C64>>,
    weights: Vec<f64>,
}

impl Likelihood {
    pub(super) fn new(ts: &TomographySet) -> Self {
        let mut projectors = Vec::new();
        let mut weights = Vec::new();
        for r in &ts.records {
            let w = r.weights();
            for (o, &n) in w.iter().enumerate() {
                if n <= 0.0 {
                    continue;
                }
                let bits = index_bits(o);
                let vecs: Vec<[C64; 2]> = (0..QUBITS)
                    .map(|k| r.settings[k].eigenvector(bits[k]))
                    .collect();
                let v = DVector::from_fn(DIM, |j, _| {
                    let jb = index_bits(j);
                    (0..QUBITS).fold(C64::new(1.0, 0.0), |acc, k| acc * vecs[k][jb[k] as usize])
                });
                projectors.push(v);
                weights.push(n);
            }
        }
        Self {
            projectors,
            weights,
        }
    }

    fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|v| v.dotc(&(rho * v)).re)
            .collect()
    }

    fn log_likelihood(&self, rho: &ComplexMatrix) -> f64 {
        let mut ll = 0.0;
        for (p, n) in self.probabilities(rho).into_iter().zip(&self.weights) {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += n * p.ln();
        }
        ll
    }

    // dLL/drho as the Hermitian matrix sum (n/p) |v><v|.
    fn rho_gradient(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut g = ComplexMatrix::zeros(DIM, DIM);
        for (v, n) in self.projectors.iter().zip(&self.weights) {
            let p = v.dotc(&(rho * v)).re;
            g += (v * v.adjoint()) * C64::new(n / p, 0.0);
        }
        g
    }
}

fn t_from_params(x: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(DIM, DIM);
    let mut k = 0;
    for i in 0..DIM {
        for j in 0..i {
            t[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
        t[(i, i)] = C64::new(x[k], 0.0);
        k += 1;
    }
    t
}

pub(super) fn params_from_t(t: &ComplexMatrix) -> Vec<f64> {
    let mut x = Vec::with_capacity(PARAMS);
    for i in 0..DIM {
        for j in 0..i {
            x.push(t[(i, j)].re);
            x.push(t[(i, j)].im);
        }
        x.push(t[(i, i)].re);
    }
    x
}

fn rho_from_t(t: &ComplexMatrix) -> ComplexMatrix {
    let a = t.adjoint() * t;
    let tr = a.trace().re;
    let rho = a / C64::new(tr, 0.0);
    (&rho + rho.adjoint()) * C64::new(0.5, 0.0)
}

// Lower-triangular T with T^dag T = rho (Cholesky of the index-reversed matrix).
pub(super) fn t_from_rho(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = rho.nrows();
    let rev = ComplexMatrix::from_fn(n, n, |i, j| rho[(n - 1 - i, n - 1 - j)]);
    let l = rev
        .cholesky()
        .ok_or_else(|| Error::Degenerate("initial state is not positive definite".into()))?
        .l();
    // rho = (J L J)(J L J)^dag with J L J upper triangular
    let upper = ComplexMatrix::from_fn(n, n, |i, j| l[(n - 1 - i, n - 1 - j)]);
    Ok(upper.adjoint())
}

// Negative log-likelihood and its gradient in the real parametrisation.
pub(super) fn objective(lik: &Likelihood, x: &[f64]) -> (f64, Vec<f64>) {
    let t = t_from_params(x);
    let a = t.adjoint() * &t;
    let tr = a.trace().re;
    let rho = &a / C64::new(tr, 0.0);
    let ll = lik.log_likelihood(&rho);
    if !ll.is_finite() {
        return (f64::INFINITY, vec![0.0; x.len()]);
    }
    let g = lik.rho_gradient(&rho);
    let c = (&g * &rho).trace().re;
    let shifted = g - ComplexMatrix::identity(DIM, DIM) * C64::new(c, 0.0);
    let gamma = (&t * shifted) * C64::new(2.0 / tr, 0.0);
    let grad = params_from_t(&gamma).into_iter().map(|v| -v).collect();
    (-ll, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum-likelihood state for the recorded outcomes.
///
/// Starts from the physical projection of [`linear_inversion`] and runs
/// L-BFGS with an Armijo backtracking line search, so the likelihood never
/// decreases between iterations.
pub fn mle_reconstruct(ts: &TomographySet, opts: &MleOptions) -> Result<MleResult> {
    let lik = Likelihood::new(ts);
    if lik.weights.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let lin = linear_inversion(ts)?;
    let start = project_to_physical(&lin)?;
    let eps = opts.initial_mixing.clamp(0.0, 1.0);
    let mixed = start.matrix() * C64::new(1.0 - eps, 0.0)
        + ComplexMatrix::identity(DIM, DIM) * C64::new(eps / DIM as f64, 0.0);
    let mut x = params_from_t(&t_from_rho(&mixed)?);
    let (mut f, mut g) = objective(&lik, &x);
    if !f.is_finite() {
        return Err(Error::Degenerate(
            "initial state gives zero probability to an observed outcome".into(),
        ));
    }
    let initial = -f;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        // two-loop recursion for d = -H g
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / dot(&g, &g).sqrt().max(1e-300));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        if slope.abs() < 1e-300 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = objective(&lik, &trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no descent left at working precision
            converged = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > 10 {
                history.pop_front();
            }
        }
        let change = (f - fn_).abs() / f.abs().max(1.0);
        x = xn;
        f = fn_;
        g = gn;
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("maximum-likelihood reconstruction stopped at the iteration cap ({iterations})");
    }
    let rho = DensityMatrix::from_matrix_unchecked(rho_from_t(&t_from_params(&x)));
    Ok(MleResult {
        rho,
        log_likelihood: -f,
        initial_log_likelihood: initial,
        iterations,
        converged,
    })
}

/// Standard deviation of `statistic` over Poisson resamples of every count.
pub fn monte_carlo_error<F>(
    ts: &TomographySet,
    statistic: F,
    resamples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&TomographySet) -> Result<f64> + Sync,
{
    let e = monte_carlo_errors(ts, |t| Ok(vec![statistic(t)?]), resamples, seed)?;
    Ok(e[0])
}

/// Like [`monte_carlo_error`] for several statistics evaluated on the same resamples.
pub fn monte_carlo_errors<F>(
    ts: &TomographySet,
    statistics: F,
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&TomographySet) -> Result<Vec<f64>> + Sync,
{
    if resamples < 2 {
        return Err(Error::param("resamples", "need at least 2"));
    }
    if !ts.has_counts() {
        return Err(Error::param(
            "tomography set",
            "Monte-Carlo errors need counts",
        ));
    }
    let values: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::child(seed, i as u64);
            let records = ts
                .records
                .iter()
                .map(|r| {
                    let Tally::Counts(c) = r.tally else {
                        unreachable!("checked above")
                    };
                    let resampled = c.map(|n| {
                        if n == 0 {
                            0
                        } else {
                            Poisson::new(n as f64)
                                .expect("positive rate")
                                .sample(&mut rng) as u64
                        }
                    });
                    MeasurementRecord::counts(r.settings, resampled)
                })
                .collect();
            statistics(&TomographySet { records })
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let width = values[0].len();
    if values.iter().any(|v| v.len() != width) {
        return Err(Error::dim(width, "statistics of varying length"));
    }
    Ok((0..width)
        .map(|k| {
            let mean = values.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = values.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        })
        .collect())
}

/// Phase `theta` maximising the fidelity to `(|0101> + e^{i theta}|1010>)/sqrt2`,
/// and that fidelity. Returns `theta = 0` when the coherence vanishes.
pub fn max_fidelity_over_phase(rho: &DensityMatrix) -> Result<(f64, f64)> {
    if rho.dim() != DIM {
        return Err(Error::dim(DIM, rho.dim()));
    }
    let m = rho.matrix();
    let (a, b) = (0b0101, 0b1010);
    let coherence = m[(a, b)];
    let populations = 0.5 * (m[(a, a)].re + m[(b, b)].re);
    if coherence.norm() < 1e-15 {
        return Ok((0.0, populations));
    }
    let mut theta = -coherence.arg();
    if theta <= -std::f64::consts::PI {
        theta += std::f64::consts::TAU;
    }
    Ok((theta, populations + coherence.norm()))
}

/// Real and imaginary parts, row major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for DensityMatrixJson {
    fn from(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            real: rows(|z| z.re),
            imag: rows(|z| z.im),
        }
    }
}

impl DensityMatrixJson {
    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        let n = self.real.len();
        if self.imag.len() != n || self.real.iter().chain(&self.imag).any(|r| r.len() != n) {
            return Err(Error::dim(
                format!("{n}x{n} real and imaginary parts"),
                "ragged arrays",
            ));
        }
        DensityMatrix::new(ComplexMatrix::from_fn(n, n, |i, j| {
            C64::new(self.real[i][j], self.imag[i][j])
        }))
    }
}

/// Plain-text table of `Re(rho)` then `Im(rho)` with outcome labels.
pub fn density_matrix_table(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let mut out = String::new();
    for (title, part) in [("Re", 0), ("Im", 1)] {
        let _ = write!(out, "{title:>6}");
        for j in 0..m.ncols() {
            let _ = write!(out, " {:>7}", outcome_label(j));
        }
        out.push('\n');
        for i in 0..m.nrows() {
            let _ = write!(out, "{:>6}", outcome_label(i));
            for j in 0..m.ncols() {
                let v = if part == 0 {
                    m[(i, j)].re
                } else {
                    m[(i, j)].im
                };
                let _ = write!(out, " {:>7.4}", v);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(super) mod internals {
    pub(in crate::analysis) use super::{objective, params_from_t, t_from_rho, Likelihood};
}
