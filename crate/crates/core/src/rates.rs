//! Closed-form rate functions.
//!
//! Sign convention: every rate returned here is a positive decay
//! coefficient, `ln P ~ -rate * t`. This holds for the lower deviations
//! `P(X_max(t) <= alpha sqrt(2 sigma^2) t)` and equally for the upper
//! deviations `P(X_max(t) > v t)`, whose rate `v^2 / (2 sigma^2) - 1` is
//! therefore the negative of the exponent `1 - v^2 / (2 sigma^2)` often
//! quoted in the literature.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{alpha_from_velocity, ModelParams, RHO};

/// Which piece of the piecewise rate function produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `alpha < -rho`: the initial particle does not branch before `t`.
    NoBranchRegime,
    /// `-rho <= alpha <= 1`: the first branching is delayed to a time of
    /// order `(1 - alpha) t / sqrt(2)`.
    DelayedBranchRegime,
    /// `alpha > 1`: upper deviations.
    UpperRegime,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NoBranchRegime => "NO_BRANCH_REGIME",
            Regime::DelayedBranchRegime => "DELAYED_BRANCH_REGIME",
            Regime::UpperRegime => "UPPER_REGIME",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub rate: f64,
    pub regime: Regime,
}

/// Large-deviation rate of `X_max(t) / (sqrt(2 sigma^2) t)` at `alpha`.
///
/// The kink `alpha = -rho` itself is tagged [`Regime::DelayedBranchRegime`].
pub fn psi(alpha: f64) -> RateValue {
    if alpha < -RHO {
        RateValue {
            rate: 1.0 + alpha * alpha,
            regime: Regime::NoBranchRegime,
        }
    } else if alpha <= 1.0 {
        RateValue {
            rate: 2.0 * RHO * (1.0 - alpha),
            regime: Regime::DelayedBranchRegime,
        }
    } else {
        RateValue {
            rate: alpha * alpha - 1.0,
            regime: Regime::UpperRegime,
        }
    }
}

/// Rate of the lower-bound variational problem at raw velocity `v`.
/// Identical to `psi(alpha)`; defined only below the critical velocity.
pub fn phi(v: f64, params: &ModelParams) -> Result<RateValue> {
    params.require_unit_rate()?;
    if !(v < params.critical_velocity()) {
        return Err(invalid(format!(
            "phi requires v < sqrt(2 sigma2) = {}, got {v}",
            params.critical_velocity()
        )));
    }
    Ok(psi(alpha_from_velocity(v, params)))
}

/// Decay rate of `P(X_max(t) > v t)` for `v > sqrt(2 sigma^2)`.
pub fn upper_rate(v: f64, params: &ModelParams) -> Result<f64> {
    params.require_unit_rate()?;
    if !(v > params.critical_velocity()) {
        return Err(invalid(format!(
            "upper_rate requires v > sqrt(2 sigma2) = {}, got {v}",
            params.critical_velocity()
        )));
    }
    Ok(v * v / (2.0 * params.sigma2) - 1.0)
}

/// Coefficient of `ln t` in the Bramson centering.
pub const BRAMSON_LOG_COEFF: f64 = 3.0 / (2.0 * SQRT_2);

/// `m(t) = sqrt(2) t - 3 / (2 sqrt(2)) ln t`, in units of `sigma`.
pub fn bramson_centering(t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("bramson_centering requires t > 0, got {t}")));
    }
    Ok(SQRT_2 * t - BRAMSON_LOG_COEFF * t.ln())
}

/// Optimal strategy for the lower deviation event at `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioGeometry {
    /// First branching time divided by `t`.
    pub tau_fraction: f64,
    /// Pre-branch displacement in units of `sigma t`.
    pub endpoint_coeff: f64,
    /// Drift that carries the particle to that endpoint by the branching time.
    pub drift: f64,
}

pub fn scenario_geometry(alpha: f64, params: &ModelParams) -> Result<ScenarioGeometry> {
    params.validate()?;
    if !(alpha < 1.0) {
        return Err(invalid(format!("scenario_geometry requires alpha < 1, got {alpha}")));
    }
    let sigma = params.sigma();
    if alpha >= -RHO {
        let tau_fraction = (1.0 - alpha) / SQRT_2;
        let endpoint_coeff = -RHO * (1.0 - alpha);
        Ok(ScenarioGeometry {
            tau_fraction,
            endpoint_coeff,
            drift: endpoint_coeff * sigma / tau_fraction,
        })
    } else {
        Ok(ScenarioGeometry {
            tau_fraction: 1.0,
            endpoint_coeff: alpha * SQRT_2,
            drift: alpha * params.critical_velocity(),
        })
    }
}

/// Decay constant of the lower tail of `X_max` below its Bramson centering.
pub const CHEN_DECAY_CONSTANT: f64 = 1.0 / (6.0 * SQRT_2);

/// Rate lower bound `(1 - alpha) / 6` implied by the lower-tail estimate
/// with decay constant [`CHEN_DECAY_CONSTANT`] applied at depth
/// `z = sqrt(2) (1 - alpha) t`.
pub fn chen_lower_bound(alpha: f64) -> Result<f64> {
    if !(alpha < 1.0) {
        return Err(invalid(format!("chen_lower_bound requires alpha < 1, got {alpha}")));
    }
    Ok(CHEN_DECAY_CONSTANT * SQRT_2 * (1.0 - alpha))
}

/// Conjectured power of `t` in the prefactor of `P(X_max(t) <= alpha sqrt(2 sigma^2) t)`
/// for `-rho < alpha < 1`. In a fit `-ln P = a t + b ln t + c` it appears as `b = -3 rho / 2`.
pub fn prefactor_exponent() -> f64 {
    1.5 * RHO
}
