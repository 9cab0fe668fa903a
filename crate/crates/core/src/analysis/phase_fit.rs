//! Cosine fit of a witness scan against heater power.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_POINTS: usize = 4000;

/// `y = amplitude * cos(slope * P + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub amplitude: f64,
    /// Phase per unit power.
    pub slope: f64,
    pub offset: f64,
    /// Power at the maximum closest to the middle of the scan.
    pub p0: f64,
    pub rms_residual: f64,
}

impl PhaseFit {
    pub fn eval(&self, p: f64) -> f64 {
        self.amplitude * (self.slope * p + self.offset).cos()
    }
}

// Linear least squares for y = c1 cos(aP) + c2 sin(aP); returns (c, sse).
fn linear_part(points: &[(f64, f64)], a: f64) -> Option<(Vector2<f64>, f64)> {
    let mut m = Matrix2::zeros();
    let mut r = Vector2::zeros();
    for &(p, y) in points {
        let v = Vector2::new((a * p).cos(), (a * p).sin());
        m += v * v.transpose();
        r += v * y;
    }
    if m.determinant().abs() < 1e-12 * (1.0 + m.norm_squared()) {
        return None;
    }
    let c = m.lu().solve(&r)?;
    let sse = points
        .iter()
        .map(|&(p, y)| (c[0] * (a * p).cos() + c[1] * (a * p).sin() - y).powi(2))
        .sum();
    Some((c, sse))
}

fn sse(points: &[(f64, f64)], q: &Vector3<f64>) -> f64 {
    points
        .iter()
        .map(|&(p, y)| (q[0] * (q[1] * p + q[2]).cos() - y).powi(2))
        .sum()
}

/// Least-squares fit of `A cos(a P + b)`.
///
/// The slope is located on a grid (with the amplitude and offset solved
/// linearly at each grid point) and then refined jointly.
pub fn fit_phase_scan(points: &[(f64, f64)]) -> Result<PhaseFit> {
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(p, y)| !p.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite point".into()));
    }
    let (pmin, pmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(p, _)| {
            (lo.min(p), hi.max(p))
        });
    let span = pmax - pmin;
    let mean = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
    let spread = points.iter().map(|(_, y)| (y - mean).powi(2)).sum::<f64>();
    if !(span > 0.0) || spread < 1e-24 {
        return Err(Error::Fit("scan carries no cosine signal".into()));
    }
    let mut sorted: Vec<f64> = points.iter().map(|(p, _)| *p).collect();
    sorted.sort_by(f64::total_cmp);
    let step = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    // from a quarter period over the scan up to the sampling limit
    let (a_lo, a_hi) = (PI / (2.0 * span), PI / step);
    let mut best: Option<(f64, Vector2<f64>, f64)> = None;
    for k in 0..GRID_POINTS {
        let a = a_lo * (a_hi / a_lo).powf(k as f64 / (GRID_POINTS - 1) as f64);
        if let Some((c, e)) = linear_part(points, a) {
            if best.as_ref().is_none_or(|b| e < b.2) {
                best = Some((a, c, e));
            }
        }
    }
    let (a, c, _) = best.ok_or_else(|| Error::Fit("normal equations are singular".into()))?;
    let mut q = Vector3::new(c.norm(), a, (-c[1]).atan2(c[0]));

    // Levenberg-Marquardt on (A, a, b)
    let mut f = sse(points, &q);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(p, y) in points {
            let arg = q[1] * p + q[2];
            let (s, co) = arg.sin_cos();
            let j = Vector3::new(co, -q[0] * p * s, -q[0] * s);
            jtj += j * j.transpose();
            jtr += j * (q[0] * co - y);
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for d in 0..3 {
                m[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(delta) = m.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = q + delta;
            let ft = sse(points, &trial);
            if ft < f {
                accepted = (f - ft) > 1e-30;
                q = trial;
                f = ft;
                lambda = (lambda * 0.3).max(1e-15);
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if q[0] < 0.0 {
        q[0] = -q[0];
        q[2] += PI;
    }
    if q[1] < 0.0 {
        q[1] = -q[1];
        q[2] = -q[2];
    }
    let offset = (q[2] + PI).rem_euclid(TAU) - PI;
    let (amplitude, slope) = (q[0], q[1]);
    if !(amplitude > 0.0) || !(slope > 0.0) {
        return Err(Error::Fit("degenerate cosine".into()));
    }
    let mid = 0.5 * (pmin + pmax);
    let k = ((slope * mid + offset) / TAU).round();
    let p0 = (TAU * k - offset) / slope;
    Ok(PhaseFit {
        amplitude,
        slope,
        offset,
        p0,
        rms_residual: (f / points.len() as f64).sqrt(),
    })
}
