//! Model parameters and the conversion between raw velocities `v` and the
//! normalized velocity `alpha = v / sqrt(2 sigma^2)`.
//!
//! Everything downstream works in raw units; `alpha` only appears at the
//! presentation layer and in the closed-form rates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `sqrt(2) - 1`, the location (with a minus sign) of the kink of the lower
/// rate function.
pub const RHO: f64 = std::f64::consts::SQRT_2 - 1.0;

/// The constant `rho = sqrt(2) - 1` as a value type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    pub value: f64,
}

impl Rho {
    pub fn new() -> Self {
        Rho {
            value: 2.0f64.sqrt() - 1.0,
        }
    }
}

impl Default for Rho {
    fn default() -> Self {
        Rho::new()
    }
}

/// Binary branching Brownian motion: diffusion variance `sigma2` per unit
/// time, exponential branching at rate `branch_rate`, two offspring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma2: f64,
    pub branch_rate: f64,
    pub offspring_count: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sigma2: 1.0,
            branch_rate: 1.0,
            offspring_count: 2,
        }
    }
}

impl ModelParams {
    pub fn new(sigma2: f64) -> Result<Self> {
        let p = ModelParams {
            sigma2,
            ..ModelParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_branch_rate(mut self, branch_rate: f64) -> Result<Self> {
        self.branch_rate = branch_rate;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(invalid(format!("sigma2 must be > 0, got {}", self.sigma2)));
        }
        if !(self.branch_rate.is_finite() && self.branch_rate > 0.0) {
            return Err(invalid(format!(
                "branch_rate must be > 0, got {}",
                self.branch_rate
            )));
        }
        if self.offspring_count != 2 {
            return Err(invalid(format!(
                "only binary branching is supported, got offspring_count = {}",
                self.offspring_count
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Asymptotic speed `sqrt(2 sigma^2)` of the rightmost particle.
    pub fn critical_velocity(&self) -> f64 {
        (2.0 * self.sigma2).sqrt()
    }

    /// The closed-form rates assume unit branching rate.
    pub(crate) fn require_unit_rate(&self) -> Result<()> {
        self.validate()?;
        if self.branch_rate != 1.0 {
            return Err(invalid(format!(
                "closed-form rates assume branch_rate = 1, got {}; rescale time instead",
                self.branch_rate
            )));
        }
        Ok(())
    }
}

pub fn alpha_from_velocity(v: f64, params: &ModelParams) -> f64 {
    v / params.critical_velocity()
}

pub fn velocity_from_alpha(alpha: f64, params: &ModelParams) -> f64 {
    alpha * params.critical_velocity()
}

/// A velocity expressed both ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery {
    pub alpha: f64,
    pub v: f64,
}

impl RateQuery {
    pub fn from_alpha(alpha: f64, params: &ModelParams) -> Self {
        RateQuery {
            alpha,
            v: velocity_from_alpha(alpha, params),
        }
    }

    pub fn from_velocity(v: f64, params: &ModelParams) -> Self {
        RateQuery {
            alpha: alpha_from_velocity(v, params),
            v,
        }
    }
}
