//! Thermal phase-shifter network with crosstalk.
//!
//! The sixteen resistors split into two banks: resistors 1..=8 set the MZI
//! input phases `alpha`, resistors 9..=16 set the internal phases `phi`.
//! Each phase responds linearly to the squared currents of its bank.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KRAD: f64 = 1e3;
const MAX_LIFT: i32 = 4;
const ROUND_TRIP_TOL: f64 = 1e-6;

/// Current-squared to phase response of the heater banks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterCalibration {
    /// Unit of `a` and `b`; only `"krad/A^2"` and `"rad/A^2"` are understood.
    pub units: String,
    /// Alpha bank response, row-major 4x8.
    pub a: [[f64; 8]; 4],
    /// Phi bank response, row-major 4x8.
    pub b: [[f64; 8]; 4],
    /// Phi offsets at zero current (rad).
    pub phi0: [f64; 4],
    /// Heater resistances (ohm), resistor 1 first.
    pub resistances: [f64; 16],
    /// 1-based indices of resistors that cannot be driven.
    pub dead_channels: Vec<usize>,
}

impl Default for HeaterCalibration {
    fn default() -> Self {
        Self {
            units: "krad/A^2".into(),
            a: [
                [
                    53.031, -54.123, -10.807, -4.293, -2.302, -1.307, -1.000, -0.733,
                ],
                [
                    2.915, 9.016, 49.504, -48.858, -9.342, -3.271, -1.604, -0.801,
                ],
                [1.094, 1.304, 4.330, 9.644, 51.987, -53.094, -11.325, -3.920],
                [0.828, 1.124, 1.604, 2.203, 4.162, 11.675, 54.696, -51.980],
            ],
            b: [
                [
                    53.604, -52.942, -12.937, -4.535, -2.067, -1.504, 0.0, -0.730,
                ],
                [3.779, 10.918, 52.829, -54.752, -9.796, -3.963, 0.0, -1.201],
                [1.165, 1.870, 3.826, 11.283, 48.144, -54.833, 0.0, -3.791],
                [0.706, 0.926, 1.338, 2.199, 3.731, 11.630, 0.0, -52.863],
            ],
            phi0: [3.8656, 2.838, 0.798, 0.990],
            // individual values are not tabulated; all lie in 410..=430 ohm
            resistances: [420.0; 16],
            dead_channels: vec![15],
        }
    }
}

/// Input and internal phases of the four MZIs (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziPhases {
    pub alpha: [f64; 4],
    pub phi: [f64; 4],
}

impl HeaterCalibration {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cal: Self = toml::from_str(s).map_err(|e| Error::Calibration(e.to_string()))?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Calibration(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    fn scale(&self) -> Result<f64> {
        match self.units.as_str() {
            "krad/A^2" => Ok(KRAD),
            "rad/A^2" => Ok(1.0),
            other => Err(Error::Calibration(format!("unknown units `{other}`"))),
        }
    }

    pub fn is_dead(&self, resistor: usize) -> bool {
        self.dead_channels.contains(&resistor)
    }

    pub fn validate(&self) -> Result<()> {
        self.scale()?;
        for &d in &self.dead_channels {
            if !(1..=16).contains(&d) {
                return Err(Error::Calibration(format!(
                    "dead channel {d} is not a resistor index"
                )));
            }
            let (bank, col) = if d <= 8 {
                (&self.a, d - 1)
            } else {
                (&self.b, d - 9)
            };
            if bank.iter().any(|row| row[col] != 0.0) {
                return Err(Error::Calibration(format!(
                    "dead resistor {d} has a nonzero response column"
                )));
            }
        }
        // a dead heater cannot dominate its own row; only live ones are checked
        for (name, bank, offset) in [("A", &self.a, 1), ("B", &self.b, 9)] {
            for (i, row) in bank.iter().enumerate() {
                let own = [2 * i, 2 * i + 1];
                let floor = own
                    .iter()
                    .filter(|&&c| !self.is_dead(offset + c))
                    .map(|&c| row[c].abs())
                    .fold(f64::INFINITY, f64::min);
                let rest = (0..8)
                    .filter(|c| !own.contains(c))
                    .map(|c| row[c].abs())
                    .fold(0.0, f64::max);
                if floor <= rest {
                    return Err(Error::Calibration(format!(
                        "{name} row {} is not dominated by its own heaters",
                        i + 1
                    )));
                }
            }
        }
        for (k, r) in self.resistances.iter().enumerate() {
            if !(410.0..=430.0).contains(r) {
                return Err(Error::Calibration(format!(
                    "R{} = {r} ohm outside 410..430",
                    k + 1
                )));
            }
        }
        if self.phi0.iter().any(|p| !p.is_finite()) {
            return Err(Error::Calibration("phi0 must be finite".into()));
        }
        Ok(())
    }
}

/// Phases produced by the sixteen currents (A).
pub fn heater_forward(cal: &HeaterCalibration, currents: &[f64; 16]) -> Result<MziPhases> {
    let scale = cal.scale()?;
    for (k, &i) in currents.iter().enumerate() {
        if !(i >= 0.0) || !i.is_finite() {
            return Err(Error::Calibration(format!(
                "current I{} = {i} must be a nonnegative number",
                k + 1
            )));
        }
        if i != 0.0 && cal.is_dead(k + 1) {
            return Err(Error::Calibration(format!(
                "dead resistor R{} carries current {i} A",
                k + 1
            )));
        }
    }
    let mut alpha = [0.0; 4];
    let mut phi = cal.phi0;
    for row in 0..4 {
        for j in 0..8 {
            alpha[row] += scale * cal.a[row][j] * currents[j] * currents[j];
            phi[row] += scale * cal.b[row][j] * currents[8 + j] * currents[8 + j];
        }
    }
    Ok(MziPhases { alpha, phi })
}

/// Currents reproducing `target` modulo 2 pi at the lowest dissipated power.
///
/// For each bank the squared currents solve `M u = t + 2 pi k` with `u >= 0`.
/// Every lift vector `k` in `-4..=4` per row is tried; for each, the minimum
/// of `sum R_j u_j` is attained at a basic feasible solution, so all
/// nonsingular 4-column bases are enumerated.
pub fn heater_solve(cal: &HeaterCalibration, target: &MziPhases) -> Result<[f64; 16]> {
    cal.validate()?;
    let scale = cal.scale()?;
    if target
        .alpha
        .iter()
        .chain(target.phi.iter())
        .any(|p| !p.is_finite())
    {
        return Err(Error::param("target", "phases must be finite"));
    }
    let mut currents = [0.0; 16];

    let alpha_goal: [f64; 4] = std::array::from_fn(|i| wrap(target.alpha[i]));
    let phi_goal: [f64; 4] = std::array::from_fn(|i| wrap(target.phi[i] - cal.phi0[i]));
    let banks = [(&cal.a, alpha_goal, 0usize), (&cal.b, phi_goal, 8usize)];
    for (bank, goal, offset) in banks {
        let live: Vec<usize> = (0..8).filter(|j| !cal.is_dead(offset + j + 1)).collect();
        let weights: [f64; 8] = std::array::from_fn(|j| cal.resistances[offset + j]);
        let u = solve_bank(bank, scale, &goal, &live, &weights)?;
        for j in 0..8 {
            currents[offset + j] = u[j].max(0.0).sqrt();
        }
    }

    let reached = heater_forward(cal, &currents)?;
    let worst = reached
        .alpha
        .iter()
        .zip(target.alpha.iter())
        .chain(reached.phi.iter().zip(target.phi.iter()))
        .map(|(a, b)| wrap(a - b).abs())
        .fold(0.0, f64::max);
    if worst > ROUND_TRIP_TOL {
        return Err(Error::Solver(format!(
            "solution misses the target by {worst:e} rad"
        )));
    }
    Ok(currents)
}

/// Wraps to `(-pi, pi]`.
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

fn solve_bank(
    bank: &[[f64; 8]; 4],
    scale: f64,
    goal: &[f64; 4],
    live: &[usize],
    weights: &[f64; 8],
) -> Result<[f64; 8]> {
    if goal.iter().all(|g| g.abs() < 1e-15) {
        return Ok([0.0; 8]);
    }
    // nonsingular 4-column bases and their inverses
    let mut bases: Vec<([usize; 4], Matrix4<f64>)> = Vec::new();
    let n = live.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let cols = [live[a], live[b], live[c], live[d]];
                    let m = Matrix4::from_fn(|r, k| scale * bank[r][cols[k]]);
                    if m.determinant().abs() < 1e-9 * scale.powi(4) {
                        continue;
                    }
                    if let Some(inv) = m.try_inverse() {
                        bases.push((cols, inv));
                    }
                }
            }
        }
    }

    let mut best: Option<(f64, [f64; 8])> = None;
    let span = (2 * MAX_LIFT + 1) as usize;
    for code in 0..span.pow(4) {
        let mut rhs = Vector4::zeros();
        let mut c = code;
        for r in 0..4 {
            let k = (c % span) as i32 - MAX_LIFT;
            c /= span;
            rhs[r] = goal[r] + TAU * k as f64;
        }
        for (cols, inv) in &bases {
            let u = inv * rhs;
            if u.iter().any(|&v| v < -1e-15) {
                continue;
            }
            let cost: f64 = cols
                .iter()
                .zip(u.iter())
                .map(|(&j, &v)| weights[j] * v.max(0.0))
                .sum();
            if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                let mut full = [0.0; 8];
                for (&j, &v) in cols.iter().zip(u.iter()) {
                    full[j] = v.max(0.0);
                }
                best = Some((cost, full));
            }
        }
    }
    best.map(|(_, u)| u).ok_or_else(|| {
        Error::Solver(format!(
            "no nonnegative squared currents reach {goal:?} within {MAX_LIFT} lifts of 2 pi"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_current_gives_offsets() {
        let cal = HeaterCalibration::default();
        let p = heater_forward(&cal, &[0.0; 16]).unwrap();
        assert_eq!(p.alpha, [0.0; 4]);
        assert_eq!(p.phi, [3.8656, 2.838, 0.798, 0.990]);
    }

    #[test]
    fn single_heater_response() {
        let cal = HeaterCalibration::default();
        let mut i = [0.0; 16];
        i[0] = 0.010;
        let p = heater_forward(&cal, &i).unwrap();
        assert!((p.alpha[0] - 5.3031).abs() < 1e-12);
        assert!((p.alpha[1] - 0.2915).abs() < 1e-12);
        i[0] = 0.020;
        let q = heater_forward(&cal, &i).unwrap();
        assert!((q.alpha[0] - 4.0 * p.alpha[0]).abs() < 1e-12);
    }

    #[test]
    fn dead_channel_rejected() {
        let cal = HeaterCalibration::default();
        let mut i = [0.0; 16];
        i[14] = 0.001;
        assert!(matches!(
            heater_forward(&cal, &i),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn default_validates_and_round_trips_toml() {
        let cal = HeaterCalibration::default();
        cal.validate().unwrap();
        let text = cal.to_toml_string();
        assert_eq!(HeaterCalibration::from_toml_str(&text).unwrap(), cal);
    }

    #[test]
    fn broken_calibration_is_reported() {
        let mut cal = HeaterCalibration::default();
        cal.b[0][6] = 1.0;
        assert!(cal.validate().is_err());
        let mut cal = HeaterCalibration::default();
        cal.a[0][4] = 80.0;
        assert!(cal.validate().is_err());
        let mut cal = HeaterCalibration::default();
        cal.units = "mrad/A^2".into();
        assert!(cal.validate().is_err());
    }

    #[test]
    fn offsets_need_no_current() {
        let cal = HeaterCalibration::default();
        let target = MziPhases {
            alpha: [0.0; 4],
            phi: cal.phi0,
        };
        assert_eq!(heater_solve(&cal, &target).unwrap(), [0.0; 16]);
    }

    #[test]
    fn phi_step_uses_own_heater() {
        let cal = HeaterCalibration::default();
        let mut phi = cal.phi0;
        phi[0] += 1.0;
        let target = MziPhases {
            alpha: [0.0; 4],
            phi,
        };
        let currents = heater_solve(&cal, &target).unwrap();
        let power: Vec<f64> = (0..16)
            .map(|k| cal.resistances[k] * currents[k] * currents[k])
            .collect();
        let total: f64 = power.iter().sum();
        let own = power[8] + power[9];
        assert!(own / total > 0.8, "{power:?}");
        assert!(power
            .iter()
            .enumerate()
            .all(|(k, &p)| k == 8 || k == 9 || p < own));
        let reached = heater_forward(&cal, &currents).unwrap();
        for k in 0..4 {
            assert!(wrap(reached.phi[k] - phi[k]).abs() < 1e-6);
            assert!(wrap(reached.alpha[k]).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn forward_solve_round_trip(raw in prop::array::uniform16(0.0f64..0.012)) {
            let cal = HeaterCalibration::default();
            let mut currents = raw;
            currents[14] = 0.0;
            let phases = heater_forward(&cal, &currents).unwrap();
            let solved = heater_solve(&cal, &phases).unwrap();
            let again = heater_forward(&cal, &solved).unwrap();
            for k in 0..4 {
                prop_assert!(wrap(again.alpha[k] - phases.alpha[k]).abs() < 1e-6);
                prop_assert!(wrap(again.phi[k] - phases.phi[k]).abs() < 1e-6);
            }
        }

        #[test]
        fn response_is_quadratic(k in 0usize..16, i in 0.0f64..0.02) {
            prop_assume!(k != 14);
            let cal = HeaterCalibration::default();
            let mut one = [0.0; 16];
            one[k] = i;
            let mut two = one;
            two[k] = 2.0 * i;
            let p1 = heater_forward(&cal, &one).unwrap();
            let p2 = heater_forward(&cal, &two).unwrap();
            for r in 0..4 {
                prop_assert!((p2.alpha[r] - 4.0 * p1.alpha[r]).abs() < 1e-9);
                prop_assert!(((p2.phi[r] - cal.phi0[r]) - 4.0 * (p1.phi[r] - cal.phi0[r])).abs() < 1e-9);
            }
        }
    }
}
