//! Model parameters and derived exponents.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The three numbers that fix the model: ambient dimension `d`, kernel decay
/// exponent `p`, and regularization strength `τ ≥ 0`.
///
/// Derived quantities used throughout: `β = p − d − 1` (the power governing the
/// regularization length), `q = p − d + 1` (the decay of the one-dimensional
/// kernel marginal, so `q = β + 2`), and the length `a = τ^{1/β}` at which the
/// kernel saturates. `τ = 0` (hence `a = 0`) is admitted; operations that need
/// a strictly positive regularization say so and error out on `τ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub p: f64,
    pub tau: f64,
}

impl ModelParams {
    /// Validates `1 ≤ dim ≤ 3`, `p ≥ dim + 2` (so `q ≥ 3`, `β ≥ 1`), and `τ ≥ 0`.
    pub fn new(dim: usize, p: f64, tau: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParams(format!(
                "dim must be 1, 2, or 3, got {dim}"
            )));
        }
        if !p.is_finite() || p < dim as f64 + 2.0 {
            return Err(Error::InvalidParams(format!(
                "p must satisfy p >= dim + 2 = {}, got {p}",
                dim + 2
            )));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidParams(format!(
                "tau must be finite and >= 0, got {tau}"
            )));
        }
        Ok(Self { dim, p, tau })
    }

    /// `β = p − d − 1 ≥ 1`.
    pub fn beta(&self) -> f64 {
        self.p - self.dim as f64 - 1.0
    }

    /// `q = p − d + 1 = β + 2 ≥ 3`.
    pub fn q(&self) -> f64 {
        self.p - self.dim as f64 + 1.0
    }

    /// Saturation length `a = τ^{1/β}` (`0` when `τ = 0`).
    pub fn a(&self) -> f64 {
        if self.tau == 0.0 {
            0.0
        } else {
            self.tau.powf(1.0 / self.beta())
        }
    }

    /// Errors unless `τ > 0`.
    pub(crate) fn require_positive_tau(&self, what: &str) -> Result<()> {
        if self.tau > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{what} requires tau > 0")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_the_supported_domain() {
        let m = ModelParams::new(1, 3.0, 0.1).unwrap();
        assert_eq!(m.beta(), 1.0);
        assert_eq!(m.q(), 3.0);
        assert!((m.a() - 0.1).abs() < 1e-15);

        let m = ModelParams::new(2, 4.0, 0.0).unwrap();
        assert_eq!(m.a(), 0.0);
        assert_eq!(m.q(), 3.0);

        let m = ModelParams::new(3, 6.5, 0.01).unwrap();
        assert!((m.beta() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(ModelParams::new(0, 3.0, 0.1).is_err());
        assert!(ModelParams::new(4, 8.0, 0.1).is_err());
        assert!(ModelParams::new(1, 2.9, 0.1).is_err());
        assert!(ModelParams::new(2, 4.0, -0.1).is_err());
        assert!(ModelParams::new(2, f64::NAN, 0.1).is_err());
        assert!(ModelParams::new(2, 4.0, f64::INFINITY).is_err());
    }

    #[test]
    fn a_scales_like_tau_to_one_over_beta() {
        let m = ModelParams::new(1, 4.0, 0.04).unwrap(); // beta = 2
        assert!((m.a() - 0.2).abs() < 1e-15);
    }
}
