use crate::error::{invalid, Error, Result};

/// Uniform grid on `[x_min, x_max]` with a base time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dt: f64,
    pub n_points: usize,
}

/// `min(0.25 dx^2 / sigma^2, 0.01)`.
pub fn default_dt(dx: f64, sigma2: f64) -> f64 {
    (0.25 * dx * dx / sigma2).min(0.01)
}

impl Grid {
    /// `x_max` is moved onto the last gridpoint.
    pub fn new(x_min: f64, x_max: f64, dx: f64, sigma2: f64) -> Result<Grid> {
        if !(x_min < 0.0 && x_max > 0.0 && x_min.is_finite() && x_max.is_finite()) {
            return Err(invalid(format!("grid needs x_min < 0 < x_max, got [{x_min}, {x_max}]")));
        }
        if !(dx > 0.0 && dx.is_finite()) || !(sigma2 > 0.0) {
            return Err(invalid(format!("grid needs dx > 0 and sigma2 > 0, got {dx}, {sigma2}")));
        }
        let n_points = ((x_max - x_min) / dx).round() as usize + 1;
        if n_points < 5 {
            return Err(invalid("grid needs at least 5 points"));
        }
        Ok(Grid {
            x_min,
            x_max: x_min + (n_points - 1) as f64 * dx,
            dx,
            dt: default_dt(dx, sigma2),
            n_points,
        })
    }

    pub fn with_dt(mut self, dt: f64, sigma2: f64) -> Result<Grid> {
        if !(dt > 0.0 && dt <= self.dx * self.dx / sigma2) {
            return Err(invalid(format!(
                "dt must lie in (0, dx^2 / sigma2 = {}], got {dt}",
                self.dx * self.dx / sigma2
            )));
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    /// Left node and fractional offset for linear interpolation at `x`.
    pub(crate) fn locate(&self, x: f64, t: f64) -> Result<(usize, f64)> {
        if !(x >= self.x_min && x <= self.x_max) {
            return Err(Error::DomainOverflow {
                x,
                t,
                x_min: self.x_min,
                x_max: self.x_max,
            });
        }
        let s = (x - self.x_min) / self.dx;
        let i = (s.floor() as usize).min(self.n_points - 2);
        Ok((i, s - i as f64))
    }
}
