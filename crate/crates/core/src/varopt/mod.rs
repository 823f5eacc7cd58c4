//! Numerical solution of the lower-bound variational problem
//!
//! ```text
//! J*(t) = sup_{0 < tau <= t}  -tau + ln Phi((v t - sqrt(2 sigma^2) (t - tau) + margin) / (sigma sqrt(tau)))
//! ```
//!
//! i.e. the log of the probability that the initial particle stays
//! unbranched until `tau` and ends up far enough to the left that a
//! typical BBM started there stays below `v t` at time `t`. `-J*/t`
//! converges to `phi(v)`.

mod gauss;

pub use gauss::{log_normal_cdf, normal_pdf};

use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::rates::phi;

/// Points in the coarse scan that precedes golden-section refinement.
pub const DEFAULT_SCAN_POINTS: usize = 2048;

/// Inputs of the variational objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub v: f64,
    pub t: f64,
    pub sigma2: f64,
    /// Signed offset of the integration endpoint: `-1` for the lower-bound
    /// form, `+sqrt(t)` for the upper-bound variant.
    pub margin: f64,
}

impl ObjectiveSpec {
    pub fn new(v: f64, t: f64, sigma2: f64, margin: f64) -> Result<Self> {
        let spec = ObjectiveSpec { v, t, sigma2, margin };
        spec.validate()?;
        Ok(spec)
    }

    /// Endpoint `v t - sqrt(2 sigma^2) (t - tau) - 1`.
    pub fn lower_bound_form(v: f64, t: f64, sigma2: f64) -> Result<Self> {
        Self::new(v, t, sigma2, -1.0)
    }

    /// Endpoint `v t - sqrt(2 sigma^2) (t - tau) + sqrt(t)`.
    pub fn upper_bound_form(v: f64, t: f64, sigma2: f64) -> Result<Self> {
        Self::new(v, t, sigma2, t.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(invalid(format!("objective requires t > 0, got {}", self.t)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid(format!("objective requires sigma2 > 0, got {}", self.sigma2)));
        }
        if !(self.v < (2.0 * self.sigma2).sqrt()) || !self.margin.is_finite() {
            return Err(invalid(format!(
                "objective requires v < sqrt(2 sigma2) and a finite margin, got v = {}, margin = {}",
                self.v, self.margin
            )));
        }
        Ok(())
    }

    fn eval(&self, tau: f64) -> f64 {
        let endpoint = self.v * self.t - (2.0 * self.sigma2).sqrt() * (self.t - tau) + self.margin;
        -tau + log_normal_cdf(endpoint / (self.sigma2 * tau).sqrt())
    }
}

/// Log of `e^{-tau}` times the Gaussian mass left of the endpoint.
pub fn objective(tau: f64, spec: &ObjectiveSpec) -> Result<f64> {
    spec.validate()?;
    if !(tau > 0.0 && tau <= spec.t) {
        return Err(invalid(format!("tau must lie in (0, {}], got {tau}", spec.t)));
    }
    Ok(spec.eval(tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub tau_star: f64,
    pub log_value: f64,
    /// `-log_value / t`.
    pub empirical_rate: f64,
}

pub fn maximize(spec: &ObjectiveSpec) -> Result<Optimum> {
    maximize_with_scan(spec, DEFAULT_SCAN_POINTS)
}

/// Coarse scan over `scan_points` equally spaced `tau` in `(0, t]`, then
/// golden-section refinement inside the bracket around the best point.
pub fn maximize_with_scan(spec: &ObjectiveSpec, scan_points: usize) -> Result<Optimum> {
    spec.validate()?;
    if scan_points < 2 {
        return Err(invalid("need at least two scan points"));
    }
    let t = spec.t;
    let h = t / scan_points as f64;
    let (best_k, _) = (1..=scan_points)
        .map(|k| (k, spec.eval(h * k as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, (k, f)| if f > acc.1 { (k, f) } else { acc });

    let lo = h * (best_k as f64 - 1.0);
    let hi = (h * (best_k as f64 + 1.0)).min(t);
    let tol = 1e-10 * t;
    let (mut tau_star, mut log_value) = golden_section_max(|x| spec.eval(x), lo.max(tol * 1e-3), hi, tol);

    // The refinement never lands exactly on the bracket ends.
    for cand in [h * best_k as f64, t] {
        let f = spec.eval(cand);
        if f > log_value {
            tau_star = cand;
            log_value = f;
        }
    }

    Ok(Optimum {
        tau_star,
        log_value,
        empirical_rate: -log_value / t,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub t: f64,
    pub empirical_rate: f64,
    pub phi: f64,
    pub tau_star: f64,
}

/// `-J*(t)/t` next to its limit `phi(v)` for each horizon (lower-bound form).
pub fn rate_convergence_table(v: f64, sigma2: f64, t_list: &[f64]) -> Result<Vec<RateRow>> {
    let params = ModelParams::new(sigma2)?;
    let limit = phi(v, &params)?.rate;
    t_list
        .iter()
        .map(|&t| {
            let opt = maximize(&ObjectiveSpec::lower_bound_form(v, t, sigma2)?)?;
            Ok(RateRow {
                t,
                empirical_rate: opt.empirical_rate,
                phi: limit,
                tau_star: opt.tau_star,
            })
        })
        .collect()
}
