//! Numerical laboratory for the lower large deviations of the rightmost
//! particle of a binary branching Brownian motion.
//!
//! * [`rates`]: closed-form rate functions and scenario geometry.
//! * [`varopt`]: the one-dimensional variational problem behind the lower bound.
//! * [`fkpp`]: log-domain finite-difference solver for `u(x, t) = P(X_max(t) <= x)`.
//! * [`mc`]: exact event-driven simulation and tail estimators.

pub mod error;
pub mod fkpp;
pub mod mc;
pub mod model;
pub mod rates;
pub mod varopt;

pub use error::{Error, ErrorCategory, Result};
pub use model::{alpha_from_velocity, velocity_from_alpha, ModelParams, RateQuery, Rho, RHO};
pub use rates::{psi, Regime, RateValue, ScenarioGeometry};
