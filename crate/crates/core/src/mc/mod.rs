//! Monte Carlo for the rightmost particle: exact simulation, the plain
//! tail estimator, and the scenario estimator for the restricted event
//! "no branching before `tau`, then an ordinary BBM".
//!
//! All estimators run trials in parallel on the current rayon pool. Trial
//! `i` draws from its own ChaCha stream, and per-trial results are reduced
//! in trial order with [`pairwise_sum`], so estimates are bit-identical for
//! any worker count.

mod sim;
mod stats;

pub use sim::{
    simulate_from, simulate_trial, simulate_xmax, trial_rng, BbmSample, SimConfig,
    DEFAULT_MAX_PARTICLES,
};
pub use stats::{ks_one_sided, pairwise_sum, KsResult};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{velocity_from_alpha, ModelParams, RHO};
use crate::rates::scenario_geometry;
use crate::varopt::log_normal_cdf;

/// Pre-branch duration, as a fraction of `t`, used below the kink where
/// the optimal scenario never branches.
pub const DEFAULT_NO_BRANCH_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Naive,
    Scenario,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Scenario => "scenario",
        }
    }
}

/// A Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimator: EstimatorKind,
    pub p_hat: f64,
    pub stderr: f64,
    pub n_trials: usize,
    /// `ln p_hat`, from a log-sum-exp over per-trial log weights.
    pub log_p_hat: f64,
    /// `(sum w)^2 / sum w^2` over the trials that hit the event.
    pub ess: f64,
    /// Set when `ess < 0.01 n_trials`.
    pub low_ess: bool,
    pub seed: u64,
}

impl Estimate {
    /// Standard error with the binomial variance evaluated at no less than
    /// one success, so an empty count still carries the usual `~1/n`
    /// resolution.
    pub fn resolution_stderr(&self) -> f64 {
        match self.estimator {
            EstimatorKind::Naive => {
                let n = self.n_trials as f64;
                let p = self.p_hat.max(1.0 / n);
                self.stderr.max((p * (1.0 - p) / n).sqrt())
            }
            EstimatorKind::Scenario => self.stderr,
        }
    }
}

/// Runs `n` trials in parallel and returns them in trial order.
pub fn simulate_trials(config: &SimConfig, n: usize) -> Result<Vec<BbmSample>> {
    config.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_trial(config, i))
        .collect()
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Plain estimator of `P(X_max(t) <= x)`.
pub fn estimate_tail(config: &SimConfig, x: f64, n_trials: usize) -> Result<Estimate> {
    config.validate()?;
    if n_trials < 100 {
        return Err(invalid(format!("need at least 100 trials, got {n_trials}")));
    }
    let hits: Vec<Option<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| simulate_trial(config, i).map(|s| (s.x_max <= x).then_some(0.0)))
        .collect::<Result<_>>()?;
    let mut est = aggregate(EstimatorKind::Naive, &hits, config.seed);
    let n = n_trials as f64;
    est.stderr = (est.p_hat * (1.0 - est.p_hat) / n).sqrt();
    Ok(est)
}

/// The restricted event: no branching on `[0, tau]`, pre-branch
/// displacement sampled with drift `drift`, final maximum below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub tau: f64,
    pub drift: f64,
    pub threshold: f64,
}

impl ScenarioConfig {
    /// Optimal geometry at `alpha` for horizon `t`; below the kink the
    /// pre-branch window is `no_branch_fraction * t`.
    pub fn from_alpha(alpha: f64, params: &ModelParams, t: f64, no_branch_fraction: f64) -> Result<Self> {
        let g = scenario_geometry(alpha, params)?;
        if !(no_branch_fraction > 0.0 && no_branch_fraction <= 1.0) {
            return Err(invalid(format!(
                "no-branch fraction must lie in (0, 1], got {no_branch_fraction}"
            )));
        }
        let fraction = if alpha < -RHO { no_branch_fraction } else { g.tau_fraction };
        let scen = ScenarioConfig {
            tau: fraction * t,
            drift: g.drift,
            threshold: velocity_from_alpha(alpha, params) * t,
        };
        scen.validate(t)?;
        Ok(scen)
    }

    pub fn validate(&self, t: f64) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= t) {
            return Err(invalid(format!("tau must lie in (0, {t}], got {}", self.tau)));
        }
        if !self.drift.is_finite() || self.threshold.is_nan() {
            return Err(invalid("scenario drift and threshold must be finite"));
        }
        Ok(())
    }

    /// `ln` of `e^{-beta tau}` times the likelihood ratio of the driftless
    /// Gaussian against the drifted proposal at `y`.
    pub fn log_weight(&self, y: f64, params: &ModelParams) -> f64 {
        let mu = self.drift;
        -params.branch_rate * self.tau - mu * y / params.sigma2
            + mu * mu * self.tau / (2.0 * params.sigma2)
    }
}

/// Unbiased estimator of `P(X_max(t) <= x, no branching on [0, tau])`, a
/// lower bound on `P(X_max(t) <= x)`.
pub fn scenario_estimate(config: &SimConfig, scen: &ScenarioConfig, n_trials: usize) -> Result<Estimate> {
    config.validate()?;
    scen.validate(config.t)?;
    if n_trials < 100 {
        return Err(invalid(format!("need at least 100 trials, got {n_trials}")));
    }
    let params = config.params;
    let sigma = params.sigma();
    let rest = config.t - scen.tau;
    let hits: Vec<Option<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(config.seed, i);
            let z: f64 = StandardNormal.sample(&mut rng);
            let y = scen.drift * scen.tau + sigma * scen.tau.sqrt() * z;
            let s = simulate_from(&mut rng, &params, rest, y, config.max_particles)?;
            Ok((s.x_max <= scen.threshold).then(|| scen.log_weight(y, &params)))
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(EstimatorKind::Scenario, &hits, config.seed))
}

/// Mean, standard error and ESS of per-trial weights given in log space
/// (`None` for trials outside the event).
fn aggregate(estimator: EstimatorKind, log_weights: &[Option<f64>], seed: u64) -> Estimate {
    let n = log_weights.len() as f64;
    let m = log_weights
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Estimate {
            estimator,
            p_hat: 0.0,
            stderr: 0.0,
            n_trials: log_weights.len(),
            log_p_hat: f64::NEG_INFINITY,
            ess: 0.0,
            low_ess: true,
            seed,
        };
    }
    let scaled: Vec<f64> = log_weights
        .iter()
        .map(|w| w.map_or(0.0, |lw| (lw - m).exp()))
        .collect();
    let squares: Vec<f64> = scaled.iter().map(|w| w * w).collect();
    let s1 = pairwise_sum(&scaled);
    let s2 = pairwise_sum(&squares);
    let mean_scaled = s1 / n;
    let var_scaled = ((s2 / n - mean_scaled * mean_scaled) * n / (n - 1.0)).max(0.0);
    let ess = s1 * s1 / s2;
    let log_p_hat = m + s1.ln() - n.ln();
    Estimate {
        estimator,
        p_hat: log_p_hat.exp(),
        stderr: m.exp() * (var_scaled / n).sqrt(),
        n_trials: log_weights.len(),
        log_p_hat,
        ess,
        low_ess: ess < 0.01 * n,
        seed,
    }
}

/// `ln E[#particles above v t at time t] = beta t + ln Phi(-v sqrt(t) / sigma)`.
/// Its exponential bounds `P(X_max(t) > v t)` from above.
pub fn upper_tail_first_moment(t: f64, v: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if !(t > 0.0 && t.is_finite()) || !v.is_finite() {
        return Err(invalid(format!("need t > 0 and finite v, got t = {t}, v = {v}")));
    }
    Ok(params.branch_rate * t + log_normal_cdf(-v * t.sqrt() / params.sigma()))
}

/// One CSV row of estimator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub estimator: EstimatorKind,
    pub alpha: f64,
    pub t: f64,
    pub x: f64,
    pub estimate: Estimate,
}

impl McRow {
    pub const HEADER: [&'static str; 10] = [
        "estimator", "alpha", "t", "x", "n_trials", "p_hat", "log_p_hat", "stderr", "ess", "seed",
    ];
}
