//! Physical parameters of the plant and their validity conditions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Constants of the reaction-diffusion plant
/// u_t = epsilon u_xx + lambda u with Robin actuation
/// u_x(1) + q u(1) = U and an insulated sensing end u_x(0) = 0.
///
/// Construction enforces positivity and the standing assumption
/// q > (lambda + epsilon) / (2 epsilon), which every kernel and certificate
/// in the crate relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Diffusion coefficient (> 0).
    pub epsilon: f64,
    /// Reaction coefficient (> 0).
    pub lambda: f64,
    /// Robin actuation coefficient (> 0).
    pub q: f64,
}

impl SystemParams {
    pub fn new(epsilon: f64, lambda: f64, q: f64) -> Result<Self> {
        let p = Self { epsilon, lambda, q };
        p.validate()?;
        Ok(p)
    }

    /// The reference configuration of the numerical study:
    /// epsilon = 0.1, lambda = 0.25, q = 2.3.
    pub fn reference() -> Self {
        Self {
            epsilon: 0.1,
            lambda: 0.25,
            q: 2.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("lambda", self.lambda), ("q", self.q)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.assumption_margin() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "q = {} must exceed (lambda + epsilon) / (2 epsilon) = {}",
                self.q,
                (self.lambda + self.epsilon) / (2.0 * self.epsilon)
            )));
        }
        Ok(())
    }

    /// q - (lambda + epsilon) / (2 epsilon); positive iff the standing
    /// assumption holds.
    pub fn assumption_margin(&self) -> f64 {
        self.q - (self.lambda + self.epsilon) / (2.0 * self.epsilon)
    }

    /// lambda / epsilon, the constant the kernels are built from.
    pub fn reaction_ratio(&self) -> f64 {
        self.lambda / self.epsilon
    }

    /// Robin coefficient of the controlled target system,
    /// r = q - lambda / (2 epsilon). Exceeds 1/2 under the standing
    /// assumption.
    pub fn target_robin(&self) -> f64 {
        self.q - self.lambda / (2.0 * self.epsilon)
    }
}
