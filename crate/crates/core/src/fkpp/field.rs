use crate::error::{invalid, Error, Result};
use crate::varopt::log_normal_cdf;

use super::grid::Grid;

/// Values of the initial condition are clamped from below at this level
/// unless the caller chooses another floor. Anything smaller than
/// `e^{-1000}` is irrelevant next to the tails the solver is asked about.
pub const DEFAULT_LOG_FLOOR: f64 = -1000.0;

/// `L(x) = ln u(x, t)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogField {
    pub log_u: Vec<f64>,
    pub time: f64,
    pub grid: Grid,
}

impl LogField {
    /// `ln u` at `x` by linear interpolation of `L`.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let (i, w) = self.grid.locate(x, self.time)?;
        Ok((1.0 - w) * self.log_u[i] + w * self.log_u[i + 1])
    }

    /// Checks that `L` is a log-CDF pinned near zero on the right.
    pub fn check_invariants(&self) -> Result<()> {
        if self.log_u.len() != self.grid.n_points {
            return Err(invalid("field length does not match grid"));
        }
        if self.log_u.iter().any(|&l| !(l <= 0.0)) {
            return Err(invalid("ln u must be <= 0 everywhere"));
        }
        if self.log_u.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("ln u must be nondecreasing in x"));
        }
        if *self.log_u.last().unwrap() < -1e-6 {
            return Err(invalid("right boundary is not pinned at u = 1"));
        }
        Ok(())
    }
}

/// Smoothed step `ln Phi(x / eps)`, clamped below at [`DEFAULT_LOG_FLOOR`].
pub fn init_field(grid: &Grid, smoothing_eps: f64) -> Result<LogField> {
    init_field_with_floor(grid, smoothing_eps, DEFAULT_LOG_FLOOR)
}

pub fn init_field_with_floor(grid: &Grid, smoothing_eps: f64, log_floor: f64) -> Result<LogField> {
    let band = 1e-12 * grid.dx;
    if !(smoothing_eps >= 0.5 * grid.dx - band && smoothing_eps <= 4.0 * grid.dx + band) {
        return Err(invalid(format!(
            "smoothing eps must lie in [dx/2, 4 dx] = [{}, {}], got {smoothing_eps}",
            0.5 * grid.dx,
            4.0 * grid.dx
        )));
    }
    if !(log_floor < 0.0) {
        return Err(invalid(format!("log floor must be negative, got {log_floor}")));
    }
    let log_u = grid
        .xs()
        .map(|x| log_normal_cdf(x / smoothing_eps).max(log_floor))
        .collect();
    Ok(LogField {
        log_u,
        time: 0.0,
        grid: *grid,
    })
}

/// Position where `L` crosses `ln(1/2)`, linearly interpolated.
pub fn front_position(field: &LogField) -> Result<f64> {
    let level = 0.5f64.ln();
    let l = &field.log_u;
    let i = l.partition_point(|&v| v < level);
    if i == 0 || i == l.len() {
        return Err(Error::LevelNotBracketed);
    }
    let (lo, hi) = (l[i - 1], l[i]);
    let w = if hi > lo { (level - lo) / (hi - lo) } else { 0.0 };
    Ok(field.grid.x(i - 1) + w * field.grid.dx)
}
