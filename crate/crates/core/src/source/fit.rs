//! Least-squares fit of master fractions to pairwise overlaps.
//!
//! With only the four measurable pairs (a 4-cycle A-B-D-C-A) the products
//! are invariant under `(xA t, xB / t, xC / t, xD t)`. The fit reports the
//! member of that family with `xA xD = xB xC` (clamped to the box), and the
//! bounds on the unmeasured pairs are the range of the family.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{MasterFractions, Pair, PHOTONS};
use crate::error::{Error, Result};

const GRID: usize = 11;
const MAX_ITER: usize = 200;

/// Allowed range of each unmeasured overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapBounds {
    pub bc: (f64, f64),
    pub ad: (f64, f64),
}

fn objective(x: &[f64; PHOTONS], data: &[(Pair, f64)]) -> f64 {
    data.iter()
        .map(|&(p, m)| {
            let (i, j) = p.indices();
            (x[i] * x[j] - m).powi(2)
        })
        .sum()
}

fn check(data: &[(Pair, f64)]) -> Result<()> {
    for p in Pair::MEASURABLE {
        if !data.iter().any(|(q, _)| *q == p) {
            return Err(Error::Fit(format!("overlap M_{p} missing")));
        }
    }
    for (i, (p, m)) in data.iter().enumerate() {
        if !(0.0..=1.0).contains(m) {
            return Err(Error::Fit(format!("M_{p} = {m} outside [0, 1]")));
        }
        if data[..i].iter().any(|(q, _)| q == p) {
            return Err(Error::Fit(format!("M_{p} given twice")));
        }
    }
    Ok(())
}

// Projected Levenberg-Marquardt on the box [0, 1]^4.
fn refine(start: [f64; PHOTONS], data: &[(Pair, f64)]) -> ([f64; PHOTONS], f64) {
    let mut x = start;
    let mut f = objective(&x, data);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for &(p, m) in data {
            let (i, j) = p.indices();
            let r = x[i] * x[j] - m;
            let mut row = Vector4::zeros();
            row[i] = x[j];
            row[j] = x[i];
            jtj += row * row.transpose();
            jtr += row * r;
        }
        if jtr.norm() < 1e-15 {
            break;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..PHOTONS {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = x;
            for k in 0..PHOTONS {
                trial[k] = (x[k] + step[k]).clamp(0.0, 1.0);
            }
            let ft = objective(&trial, data);
            if ft < f {
                x = trial;
                f = ft;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, f)
}

// Feasible interval of the cycle gauge parameter `t`.
fn gauge_interval(x: &[f64; PHOTONS]) -> (f64, f64) {
    let lo = x[1].max(x[2]);
    let inv = |v: f64| if v > 0.0 { 1.0 / v } else { f64::INFINITY };
    let hi = inv(x[0]).min(inv(x[3]));
    (lo, hi)
}

fn constrained(data: &[(Pair, f64)]) -> bool {
    data.iter().any(|(p, _)| matches!(p, Pair::AD | Pair::BC))
}

fn balance(x: [f64; PHOTONS]) -> [f64; PHOTONS] {
    let (ad, bc) = (x[0] * x[3], x[1] * x[2]);
    if ad <= 0.0 || bc <= 0.0 {
        return x;
    }
    let (lo, hi) = gauge_interval(&x);
    let t = (bc / ad).powf(0.25).clamp(lo, hi);
    [
        (x[0] * t).min(1.0),
        (x[1] / t).min(1.0),
        (x[2] / t).min(1.0),
        (x[3] * t).min(1.0),
    ]
}

/// Minimises the squared misfit of `x_i x_j` to the given overlaps over
/// `[0, 1]^4` from a fixed 11^4 grid of starts.
///
/// `measured` must contain the four measurable pairs and may also carry
/// `AD` and `BC`, which removes the cycle gauge freedom.
pub fn fit_master_fractions(measured: &[(Pair, f64)]) -> Result<MasterFractions> {
    check(measured)?;
    let grid: Vec<f64> = (0..GRID).map(|k| k as f64 / (GRID - 1) as f64).collect();
    let mut best: Option<([f64; PHOTONS], f64)> = None;
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                for &d in &grid {
                    let (x, f) = refine([a, b, c, d], measured);
                    let better = match &best {
                        None => true,
                        Some((bx, bf)) => {
                            let tol = 1e-14 * (1.0 + bf.abs());
                            f < bf - tol || ((f - bf).abs() <= tol && x < *bx)
                        }
                    };
                    if better {
                        best = Some((x, f));
                    }
                }
            }
        }
    }
    let (x, f) = best.ok_or_else(|| Error::Fit("no starting point".into()))?;
    if !f.is_finite() {
        return Err(Error::Fit("objective is not finite".into()));
    }
    let x = if constrained(measured) { x } else { balance(x) };
    Ok(MasterFractions(x))
}

/// Range of `M_BC` and `M_AD` over all fractions reproducing the fitted
/// products of the four measurable pairs.
pub fn overlap_bounds(measured: &[(Pair, f64)]) -> Result<OverlapBounds> {
    let MasterFractions(x) = fit_master_fractions(measured)?;
    if constrained(measured) {
        let bc = x[1] * x[2];
        let ad = x[0] * x[3];
        return Ok(OverlapBounds {
            bc: (bc, bc),
            ad: (ad, ad),
        });
    }
    let (lo, hi) = gauge_interval(&x);
    if lo > hi * (1.0 + 1e-12) {
        return Err(Error::Fit(format!("empty gauge interval [{lo}, {hi}]")));
    }
    let (bc, ad) = (x[1] * x[2], x[0] * x[3]);
    let scaled = |v: f64, t2: f64| if v == 0.0 { 0.0 } else { (v * t2).min(1.0) };
    let bc_range = if lo == 0.0 {
        (
            scaled(bc, 1.0 / (hi * hi)),
            if bc == 0.0 { 0.0 } else { 1.0 },
        )
    } else {
        (scaled(bc, 1.0 / (hi * hi)), scaled(bc, 1.0 / (lo * lo)))
    };
    let ad_range = (
        scaled(ad, lo * lo),
        if hi.is_infinite() {
            1.0
        } else {
            scaled(ad, hi * hi)
        },
    );
    Ok(OverlapBounds {
        bc: bc_range,
        ad: ad_range,
    })
}
