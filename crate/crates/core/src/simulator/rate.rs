//! Four-photon coincidence rate from the setup loss budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Printed alongside every rate estimate.
pub const RATE_DISCREPANCY_NOTE: &str = "the loss-budget product (about 14 Hz for the default budget) is \
well above the measured four-fold rate of about 0.5 Hz; the budget does not account for the difference, \
so treat this figure as an upper estimate";

/// Transmissions and source figures entering the rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossBudget {
    /// Pump repetition rate (Hz).
    pub repetition_rate: f64,
    /// Demultiplexer filling factor.
    pub filling_factor: f64,
    /// First-lens brightness.
    pub brightness: f64,
    pub eta_coupling: f64,
    pub eta_demux: f64,
    pub eta_chip: f64,
    pub eta_detector: f64,
}

impl Default for LossBudget {
    fn default() -> Self {
        Self {
            repetition_rate: 79e6,
            filling_factor: 0.67,
            brightness: 0.5,
            eta_coupling: 0.29,
            eta_demux: 0.75,
            eta_chip: 0.54,
            eta_detector: 0.65,
        }
    }
}

impl LossBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.repetition_rate > 0.0 && self.repetition_rate.is_finite()) {
            return Err(Error::param(
                "repetition_rate",
                format!("{} must be positive", self.repetition_rate),
            ));
        }
        let fractions = [
            ("filling_factor", self.filling_factor),
            ("brightness", self.brightness),
            ("eta_coupling", self.eta_coupling),
            ("eta_demux", self.eta_demux),
            ("eta_chip", self.eta_chip),
            ("eta_detector", self.eta_detector),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("{v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// `RR * FF * (beta * eta_C * eta_DMX * eta_chip * eta_D)^4 / 8`, in Hz.
pub fn coincidence_rate(budget: &LossBudget) -> Result<f64> {
    budget.validate()?;
    let b = budget;
    let per_photon = b.brightness * b.eta_coupling * b.eta_demux * b.eta_chip * b.eta_detector;
    Ok(b.repetition_rate * b.filling_factor * per_photon.powi(4) / 8.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_budget() {
        let b = LossBudget {
            repetition_rate: 8.0,
            filling_factor: 1.0,
            brightness: 1.0,
            eta_coupling: 1.0,
            eta_demux: 1.0,
            eta_chip: 1.0,
            eta_detector: 1.0,
        };
        assert!((coincidence_rate(&b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_values() {
        // direct product of the default entries
        let expected = 79e6 * 0.67 * (0.5f64 * 0.29 * 0.75 * 0.54 * 0.65).powi(4) / 8.0;
        let r = coincidence_rate(&LossBudget::default()).unwrap();
        assert!((r - expected).abs() < 1e-9);
        assert!((r - 14.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn fourth_power_law() {
        let b = LossBudget::default();
        let half = LossBudget {
            eta_chip: b.eta_chip / 2.0,
            ..b
        };
        let ratio = coincidence_rate(&b).unwrap() / coincidence_rate(&half).unwrap();
        assert!((ratio - 16.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid() {
        let b = LossBudget {
            eta_chip: 0.0,
            ..LossBudget::default()
        };
        assert!(coincidence_rate(&b).is_err());
        let b = LossBudget {
            repetition_rate: -1.0,
            ..LossBudget::default()
        };
        assert!(coincidence_rate(&b).is_err());
    }
}
