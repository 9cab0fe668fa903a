//! Photonic circuit model: preparation stage, MZI measurement stage and the
//! thermal phase-shifter network that drives it.
//!
//! Modes are 0-based in code (`0..8`); qubit `k` (0-based) lives on the mode
//! pair `(2k, 2k+1)` with the upper mode encoding `|0>`.

mod heater;

pub use heater::{heater_forward, heater_solve, HeaterCalibration, MziPhases};

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, PauliLabel, C64, I, ZERO};

pub const MODES: usize = 8;

/// Chip input modes fed by photons A, B, C, D (upper port of each coupler).
pub const INPUT_MODES: [usize; 4] = [0, 2, 4, 6];

/// Output modes reached by the (upper, lower) port of each preparation coupler
/// after the waveguide crossings.
pub const CROSSING: [(usize, usize); 4] = [(0, 2), (1, 4), (3, 6), (5, 7)];

/// Directional-coupler reflectivities, mean of the H and V characterisation.
pub const MEASURED_REFLECTIVITIES: [f64; 4] = [0.500, 0.505, 0.4905, 0.503];

/// Preparation stage: four couplers, crossings and static path phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationStage {
    /// Phase (rad) acquired on each output mode before the MZIs.
    pub path_phases: [f64; 8],
    /// Fraction of power kept in the BAR port of each coupler.
    pub reflectivities: [f64; 4],
}

impl Default for PreparationStage {
    fn default() -> Self {
        Self::ideal()
    }
}

impl PreparationStage {
    pub fn new(path_phases: [f64; 8], reflectivities: [f64; 4]) -> Result<Self> {
        let stage = Self {
            path_phases,
            reflectivities,
        };
        stage.validate()?;
        Ok(stage)
    }

    /// Balanced couplers and zero path phases.
    pub fn ideal() -> Self {
        Self {
            path_phases: [0.0; 8],
            reflectivities: [0.5; 4],
        }
    }

    /// Ideal couplers with path phases chosen so the post-selected state is
    /// `(|0101> + e^{i phase}|1010>)/sqrt 2`.
    pub fn with_state_phase(phase: f64) -> Self {
        let mut stage = Self::ideal();
        stage.set_state_phase(phase);
        stage
    }

    /// Adjusts the phase on mode 2 (0-based 1) so the generated state
    /// carries relative phase `phase`, keeping everything else.
    pub fn set_state_phase(&mut self, phase: f64) {
        let current = self.state_phase();
        self.path_phases[1] += phase - current;
    }

    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.reflectivities.iter().enumerate() {
            if !(*r > 0.0 && *r < 1.0) {
                return Err(Error::param(
                    "reflectivities",
                    format!("coupler {} has R = {r}, outside (0, 1)", k + 1),
                ));
            }
        }
        if self.path_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("path_phases", "phases must be finite"));
        }
        Ok(())
    }

    /// `theta_1 - theta_2 - theta_3 + theta_4 + theta_5 - theta_6 - theta_7 + theta_8`.
    ///
    /// This equals `arg(amp(0101) / amp(1010))`; the generated state is
    /// therefore `|0101> + e^{-i theta}|1010>` up to normalisation, see
    /// [`PreparationStage::state_phase`].
    pub fn path_phase_sum(&self) -> f64 {
        const SIGNS: [f64; 8] = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0];
        self.path_phases.iter().zip(SIGNS).map(|(p, s)| p * s).sum()
    }

    /// Relative phase of `|1010>` with respect to `|0101>` in the
    /// post-selected state.
    pub fn state_phase(&self) -> f64 {
        -self.path_phase_sum()
    }
}

/// Field scattering matrix `U[out][in]` of the preparation stage.
pub fn preparation_unitary(stage: &PreparationStage) -> Result<ComplexMatrix> {
    stage.validate()?;
    let mut u = ComplexMatrix::zeros(MODES, MODES);
    for (c, &(up, low)) in CROSSING.iter().enumerate() {
        let r = stage.reflectivities[c];
        let bar = C64::new(r.sqrt(), 0.0);
        let cross = I * (1.0 - r).sqrt();
        let (in_up, in_low) = (2 * c, 2 * c + 1);
        let ph_up = C64::from_polar(1.0, stage.path_phases[up]);
        let ph_low = C64::from_polar(1.0, stage.path_phases[low]);
        u[(up, in_up)] = bar * ph_up;
        u[(up, in_low)] = cross * ph_up;
        u[(low, in_up)] = cross * ph_low;
        u[(low, in_low)] = bar * ph_low;
    }
    Ok(u)
}

/// Phases of one MZI: `alpha` between the input modes, `phi` between the arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziSetting {
    pub alpha: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PauliLabel>,
}

impl MziSetting {
    /// Stores both phases reduced to `[0, 2 pi)`.
    pub fn new(alpha: f64, phi: f64) -> Self {
        Self {
            alpha: alpha.rem_euclid(TAU),
            phi: phi.rem_euclid(TAU),
            label: None,
        }
    }

    /// 2x2 transfer matrix `DC * P(phi) * DC * P(alpha)` on (upper, lower).
    pub fn block(&self) -> ComplexMatrix {
        let dc = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(0.0, FRAC_1_SQRT_2),
                C64::new(0.0, FRAC_1_SQRT_2),
                C64::new(FRAC_1_SQRT_2, 0.0),
            ],
        );
        let phase = |x: f64| {
            ComplexMatrix::from_row_slice(
                2,
                2,
                &[C64::from_polar(1.0, x), ZERO, ZERO, C64::new(1.0, 0.0)],
            )
        };
        &dc * phase(self.phi) * &dc * phase(self.alpha)
    }
}

/// Table of MZI phases realising each projective measurement; the upper
/// detector fires for the +1 eigenvector `cos chi |0> + e^{i psi} sin chi |1>`.
pub fn setting_for_projector(p: PauliLabel) -> Result<MziSetting> {
    let (alpha, phi) = match p {
        PauliLabel::X => (0.0, PI / 2.0),
        PauliLabel::NegX => (0.0, 3.0 * PI / 2.0),
        PauliLabel::Y => (PI / 2.0, PI / 2.0),
        PauliLabel::Z => (0.0, PI),
        PauliLabel::NegZ => (0.0, 0.0),
        PauliLabel::XPlusZ => (0.0, 3.0 * PI / 4.0),
        PauliLabel::XMinusZ => (0.0, PI / 4.0),
        PauliLabel::I => {
            return Err(Error::Settings(
                "identity has no projective MZI setting".into(),
            ));
        }
    };
    let mut s = MziSetting::new(alpha, phi);
    s.label = Some(p);
    Ok(s)
}

/// Block-diagonal measurement stage over the four qubit mode pairs.
pub fn measurement_unitary(settings: &[MziSetting; 4]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(MODES, MODES);
    for (k, s) in settings.iter().enumerate() {
        let b = s.block();
        for r in 0..2 {
            for c in 0..2 {
                m[(2 * k + r, 2 * k + c)] = b[(r, c)];
            }
        }
    }
    m
}

/// Measurement stage composed after the preparation stage.
pub fn full_unitary(stage: &PreparationStage, settings: &[MziSetting; 4]) -> Result<ComplexMatrix> {
    Ok(measurement_unitary(settings) * preparation_unitary(stage)?)
}

/// Which MZI input is lit during the classical balance calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationPort {
    Upper,
    Lower,
}

impl CalibrationPort {
    /// Odd parties are addressed on their upper input, even parties on the lower.
    pub fn for_party(party: usize) -> Self {
        if party % 2 == 1 {
            CalibrationPort::Upper
        } else {
            CalibrationPort::Lower
        }
    }

    fn column(self) -> usize {
        match self {
            CalibrationPort::Upper => 0,
            CalibrationPort::Lower => 1,
        }
    }
}

/// Fraction of clicks on the upper detector for classical light entering
/// `port`, given detector efficiencies `(upper, lower)`.
pub fn detector_balance(
    setting: &MziSetting,
    port: CalibrationPort,
    efficiencies: (f64, f64),
) -> f64 {
    let b = setting.block();
    let col = port.column();
    let up = efficiencies.0 * b[(0, col)].norm_sqr();
    let down = efficiencies.1 * b[(1, col)].norm_sqr();
    if up + down == 0.0 {
        return 0.0;
    }
    up / (up + down)
}

/// Re-tunes `phi` so the efficiency-weighted detector balance matches the
/// balance the original setting gives with ideal detectors.
///
/// `alpha` does not change the single-port balance and is left as is.
pub fn compensate_setting(
    setting: &MziSetting,
    port: CalibrationPort,
    efficiencies: (f64, f64),
) -> Result<MziSetting> {
    let (eu, ed) = efficiencies;
    for e in [eu, ed] {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::param("efficiencies", format!("{e} outside (0, 1]")));
        }
    }
    let target = detector_balance(setting, port, (1.0, 1.0));
    if (eu - ed).abs() < 1e-15 || target <= 1e-15 || target >= 1.0 - 1e-15 {
        return Ok(*setting);
    }
    // raw upper-output probability that yields the target after weighting
    let x = target * ed / (eu * (1.0 - target) + ed * target);
    let half = match port {
        CalibrationPort::Upper => x.sqrt().asin(),
        CalibrationPort::Lower => x.sqrt().acos(),
    };
    let candidates = [2.0 * half, TAU - 2.0 * half];
    let phi = candidates
        .into_iter()
        .min_by(|a, b| {
            circular_distance(*a, setting.phi).total_cmp(&circular_distance(*b, setting.phi))
        })
        .expect("two candidates");
    let mut out = MziSetting::new(setting.alpha, phi);
    out.label = setting.label;
    Ok(out)
}

pub(crate) fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{is_unitary, unitarity_defect};
    use proptest::prelude::*;

    /// Entries of the textbook scattering matrix for balanced couplers.
    fn reference_matrix(theta: &[f64; 8]) -> ComplexMatrix {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let rows: [[(usize, C64); 2]; 8] = [
            [(0, one), (1, i)],
            [(2, one), (3, i)],
            [(0, i), (1, one)],
            [(4, one), (5, i)],
            [(2, i), (3, one)],
            [(6, one), (7, i)],
            [(4, i), (5, one)],
            [(6, i), (7, one)],
        ];
        let mut u = ComplexMatrix::zeros(8, 8);
        for (r, entries) in rows.iter().enumerate() {
            for &(c, v) in entries {
                u[(r, c)] = v * C64::from_polar(FRAC_1_SQRT_2, theta[r]);
            }
        }
        u
    }

    #[test]
    fn balanced_stage_matches_reference() {
        let u = preparation_unitary(&PreparationStage::ideal()).unwrap();
        assert!((&u - reference_matrix(&[0.0; 8])).norm() < 1e-12);
        let theta = [0.1, -0.4, 1.2, 0.3, 2.0, -1.1, 0.7, 0.05];
        let stage = PreparationStage::new(theta, [0.5; 4]).unwrap();
        let u = preparation_unitary(&stage).unwrap();
        assert!((&u - reference_matrix(&theta)).norm() < 1e-12);
    }

    #[test]
    fn measured_couplers_stay_unitary() {
        let stage = PreparationStage::new([0.0; 8], [0.499, 0.505, 0.490, 0.502]).unwrap();
        let u = preparation_unitary(&stage).unwrap();
        for c in 0..8 {
            let n: f64 = u.column(c).iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(is_unitary(&u, 1e-12));
    }

    #[test]
    fn rejects_bad_reflectivity() {
        assert!(PreparationStage::new([0.0; 8], [0.5, 1.0, 0.5, 0.5]).is_err());
        assert!(PreparationStage::new([0.0; 8], [0.0, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn phase_sum_and_state_phase() {
        let mut theta = [0.0; 8];
        theta[0] = PI;
        let stage = PreparationStage::new(theta, [0.5; 4]).unwrap();
        assert!((stage.path_phase_sum() - PI).abs() < 1e-15);
        let s = PreparationStage::with_state_phase(0.3);
        assert!((s.state_phase() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn table_rows() {
        let z = setting_for_projector(PauliLabel::Z).unwrap();
        assert_eq!((z.alpha, z.phi), (0.0, PI));
        let x = setting_for_projector(PauliLabel::X).unwrap();
        assert_eq!((x.alpha, x.phi), (0.0, PI / 2.0));
        let xz = setting_for_projector(PauliLabel::XPlusZ).unwrap();
        assert_eq!((xz.alpha, xz.phi), (0.0, 3.0 * PI / 4.0));
        assert!(setting_for_projector(PauliLabel::I).is_err());
    }

    /// The +1 eigenvector, written as `cos chi |0> + e^{i psi} sin chi |1>`,
    /// must leave through the upper port with certainty.
    #[test]
    fn eigenstates_exit_upper_port() {
        let rows: [(PauliLabel, f64, f64); 7] = [
            (PauliLabel::X, PI / 4.0, 0.0),
            (PauliLabel::NegX, -PI / 4.0, 0.0),
            (PauliLabel::Y, PI / 4.0, PI / 2.0),
            (PauliLabel::Z, 0.0, 0.0),
            (PauliLabel::NegZ, PI / 2.0, 0.0),
            (PauliLabel::XPlusZ, PI / 8.0, 0.0),
            (PauliLabel::XMinusZ, 3.0 * PI / 8.0, 0.0),
        ];
        for (label, chi, psi) in rows {
            let b = setting_for_projector(label).unwrap().block();
            let input = [C64::new(chi.cos(), 0.0), C64::from_polar(chi.sin(), psi)];
            let upper = b[(0, 0)] * input[0] + b[(0, 1)] * input[1];
            assert!((upper.norm_sqr() - 1.0).abs() < 1e-10, "{label}");
        }
    }

    #[test]
    fn measurement_stage_structure() {
        let settings = [
            setting_for_projector(PauliLabel::Z).unwrap(),
            setting_for_projector(PauliLabel::X).unwrap(),
            setting_for_projector(PauliLabel::Y).unwrap(),
            setting_for_projector(PauliLabel::XMinusZ).unwrap(),
        ];
        let m = measurement_unitary(&settings);
        for r in 0..8 {
            for c in 0..8 {
                if r / 2 != c / 2 {
                    assert_eq!(m[(r, c)], ZERO);
                }
            }
        }
        // Z routes |0> (upper) to the upper detector
        assert!((m[(0, 0)].norm_sqr() - 1.0).abs() < 1e-12);
        // X sends (|0> + |1>)/sqrt 2 to the upper detector
        let up = (m[(2, 2)] + m[(2, 3)]) * FRAC_1_SQRT_2;
        assert!((up.norm_sqr() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stages_are_unitary(
            theta in prop::array::uniform8(-7.0f64..7.0),
            r in prop::array::uniform4(0.01f64..0.99),
            phases in prop::array::uniform8(-7.0f64..7.0),
        ) {
            let stage = PreparationStage::new(theta, r).unwrap();
            let settings = [
                MziSetting::new(phases[0], phases[1]),
                MziSetting::new(phases[2], phases[3]),
                MziSetting::new(phases[4], phases[5]),
                MziSetting::new(phases[6], phases[7]),
            ];
            prop_assert!(unitarity_defect(&preparation_unitary(&stage).unwrap()) < 1e-12);
            prop_assert!(unitarity_defect(&measurement_unitary(&settings)) < 1e-12);
            prop_assert!(unitarity_defect(&full_unitary(&stage, &settings).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn compensation_leaves_trivial_cases() {
        let x = setting_for_projector(PauliLabel::X).unwrap();
        assert_eq!(
            compensate_setting(&x, CalibrationPort::Upper, (0.8, 0.8)).unwrap(),
            x
        );
        let z = setting_for_projector(PauliLabel::Z).unwrap();
        assert_eq!(
            compensate_setting(&z, CalibrationPort::Upper, (0.9, 1.0)).unwrap(),
            z
        );
        assert!(compensate_setting(&x, CalibrationPort::Upper, (0.0, 1.0)).is_err());
    }

    /// Bisection on phi against the 2x2 transfer matrix, independent of the
    /// closed-form inversion.
    fn bisect_phi(port: CalibrationPort, eff: (f64, f64), target: f64, lo: f64, hi: f64) -> f64 {
        let f = |phi: f64| detector_balance(&MziSetting::new(0.0, phi), port, eff) - target;
        let (mut a, mut b) = (lo, hi);
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn compensation_restores_balance() {
        let x = setting_for_projector(PauliLabel::X).unwrap();
        for port in [CalibrationPort::Upper, CalibrationPort::Lower] {
            let eff = (0.9, 1.0);
            let before = (detector_balance(&x, port, eff) - 0.5).abs();
            let c = compensate_setting(&x, port, eff).unwrap();
            let after = (detector_balance(&c, port, eff) - 0.5).abs();
            assert!(after < 1e-6, "{port:?}: {after}");
            assert!(after <= before);
            let oracle = bisect_phi(port, eff, 0.5, PI / 4.0, 3.0 * PI / 4.0);
            assert!((c.phi - oracle).abs() < 1e-9, "{} vs {}", c.phi, oracle);
        }
    }
}
