//! Log-domain finite-difference solver for `u(x, t) = P(X_max(t) <= x)`.
//!
//! `u` solves `u_t = (sigma^2/2) u_xx + u^2 - u` from a step at the origin.
//! Working with `L = ln u` keeps the left tail resolvable down to
//! `u ~ e^{-1000}` and below.

mod field;
mod fit;
mod grid;
mod stepper;

pub use field::{front_position, init_field, init_field_with_floor, LogField, DEFAULT_LOG_FLOOR};
pub use fit::{fit_time_series, LinearFit};
pub use grid::{default_dt, Grid};
pub use stepper::{Reaction, Scheme, StepStats, Stepper, INSTABILITY_LIMIT, REPAIR_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{velocity_from_alpha, ModelParams};
use crate::varopt::log_normal_cdf;

/// First start-up step as a fraction of `eps^2 / sigma^2`.
const STARTUP_DT_FRACTION: f64 = 1e-3;
/// Per-step growth of the start-up step.
const STARTUP_GROWTH: f64 = 1.25;

/// A point `(alpha sqrt(2 sigma^2) t, t)` at which `ln u` is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub alpha: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub alpha: f64,
    pub t: f64,
    pub x_probe: f64,
    pub ln_u: f64,
}

/// Front positions `u(x_front, t) = 1/2` over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontTrace {
    pub samples: Vec<(f64, f64)>,
    /// Filled in by [`FrontTrace::fit`].
    pub speed: Option<f64>,
    pub log_coeff: Option<f64>,
}

impl FrontTrace {
    /// Fits `x_front = speed t + log_coeff ln t + c` on `[t_lo, t_hi]` and
    /// stores the coefficients.
    pub fn fit(&mut self, t_lo: f64, t_hi: f64) -> Result<LinearFit> {
        let window: Vec<(f64, f64)> = self
            .samples
            .iter()
            .copied()
            .filter(|&(t, _)| t >= t_lo && t <= t_hi)
            .collect();
        let fit = fit_time_series(&window, true)?;
        self.speed = Some(fit.a);
        self.log_coeff = Some(fit.b);
        Ok(fit)
    }

    pub fn position_at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| (s.0 - t).abs() <= 1e-9 * t.max(1.0))
            .map(|s| s.1)
    }

    /// `(x(t2) - x(t1)) / (t2 - t1)` from recorded samples.
    pub fn secant_speed(&self, t1: f64, t2: f64) -> Option<f64> {
        Some((self.position_at(t2)? - self.position_at(t1)?) / (t2 - t1))
    }
}

/// `ln u` along the ray `x = alpha sqrt(2 sigma^2) t`, with an optional fit
/// of `-ln u ~ a t + b ln t + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSeries {
    pub alpha: f64,
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<LinearFit>,
}

pub fn fit_tail_series(series: &TailSeries, with_log_term: bool) -> Result<LinearFit> {
    let neg: Vec<(f64, f64)> = series.samples.iter().map(|&(t, l)| (t, -l)).collect();
    fit_time_series(&neg, with_log_term)
}

/// Numerical settings of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub dx: f64,
    /// Defaults to [`default_dt`].
    pub dt: Option<f64>,
    /// Width of the smoothed initial step; defaults to `dx`.
    pub eps: Option<f64>,
    /// Spacing of front samples; `None` records no front.
    pub front_interval: Option<f64>,
    /// Times at which the whole field is kept.
    pub snapshot_times: Vec<f64>,
    /// Overrides the automatic domain.
    pub domain: Option<(f64, f64)>,
    /// Overrides the automatic floor of the initial condition.
    pub log_floor: Option<f64>,
    pub reaction: Reaction,
    /// Steps taken with [`Scheme::Ratio`] until this time, with
    /// [`Scheme::Log`] afterwards.
    pub startup_time: f64,
    /// Log-scheme steps whose `max |dL|` exceeds this are retried with
    /// half the step.
    pub delta_target: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            dx: 0.1,
            dt: None,
            eps: None,
            front_interval: Some(1.0),
            snapshot_times: Vec::new(),
            domain: None,
            log_floor: None,
            reaction: Reaction::Fkpp,
            startup_time: 1.0,
            delta_target: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub front: FrontTrace,
    /// In the order of the requested probes.
    pub samples: Vec<ProbeSample>,
    pub snapshots: Vec<LogField>,
    pub grid: Grid,
    pub eps: f64,
    pub log_floor: f64,
    pub steps: usize,
    /// Proposals retried with a smaller step.
    pub rejected: usize,
    pub max_repair: f64,
}

impl SolveOutput {
    /// Probe samples of one `alpha` as a time series.
    pub fn tail_series(&self, alpha: f64) -> TailSeries {
        let mut samples: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.alpha == alpha)
            .map(|s| (s.t, s.ln_u))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        TailSeries {
            alpha,
            samples,
            fit: None,
        }
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&LogField> {
        self.snapshots
            .iter()
            .find(|f| (f.time - t).abs() <= 1e-9 * t.max(1.0))
    }
}

/// Domain `[v_min t - 20 sigma sqrt(t) - 10 sigma, sqrt(2 sigma^2) t + 20 sigma sqrt(t) + 10 sigma]`,
/// with `v_min` the leftmost probe velocity (at most zero), snapped so that
/// the origin is a gridpoint.
pub fn auto_domain(params: &ModelParams, t_final: f64, probes: &[Probe], dx: f64) -> (f64, f64) {
    let sigma = params.sigma();
    let v_min = probes
        .iter()
        .map(|p| velocity_from_alpha(p.alpha, params))
        .fold(0.0, f64::min);
    let spread = 20.0 * sigma * t_final.sqrt() + 10.0 * sigma;
    let lo = v_min * t_final - spread;
    let hi = params.critical_velocity() * t_final + spread;
    (-(-lo / dx).ceil() * dx, (hi / dx).ceil() * dx)
}

/// Integrates from the smoothed step to `t_final`, recording probes, the
/// front and snapshots along the way.
pub fn solve(
    params: &ModelParams,
    t_final: f64,
    probes: &[Probe],
    settings: &SolverSettings,
) -> Result<SolveOutput> {
    params.validate()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("t_final must be >= 0, got {t_final}")));
    }
    for p in probes {
        if !(p.t >= 0.0 && p.t <= t_final) {
            return Err(invalid(format!("probe time {} outside [0, {t_final}]", p.t)));
        }
        if !(p.alpha < 1.0) {
            return Err(invalid(format!("probe alpha must be < 1, got {}", p.alpha)));
        }
    }
    if !(settings.startup_time >= 0.0) {
        return Err(invalid(format!("startup time must be >= 0, got {}", settings.startup_time)));
    }
    if !(settings.delta_target > 0.0) {
        return Err(invalid(format!("delta target must be > 0, got {}", settings.delta_target)));
    }
    for &s in &settings.snapshot_times {
        if !(s >= 0.0 && s <= t_final) {
            return Err(invalid(format!("snapshot time {s} outside [0, {t_final}]")));
        }
    }

    let sigma = params.sigma();
    let (x_min, x_max) = settings
        .domain
        .unwrap_or_else(|| auto_domain(params, t_final, probes, settings.dx));
    let mut grid = Grid::new(x_min, x_max, settings.dx, params.sigma2)?;
    if let Some(dt) = settings.dt {
        grid = grid.with_dt(dt, params.sigma2)?;
    }
    for p in probes {
        grid.locate(velocity_from_alpha(p.alpha, params) * p.t, p.t)?;
    }

    let eps = settings.eps.unwrap_or(settings.dx);
    let log_floor = settings.log_floor.unwrap_or_else(|| {
        if t_final > 0.0 {
            // Twice the no-branching lower bound at the far-left corner.
            let corner = -params.branch_rate * t_final + log_normal_cdf(grid.x_min / (sigma * t_final.sqrt()));
            (2.0 * corner - 100.0).min(DEFAULT_LOG_FLOOR)
        } else {
            DEFAULT_LOG_FLOOR
        }
    });
    let mut field = init_field_with_floor(&grid, eps, log_floor)?;

    // Event times: probes, snapshots, front samples.
    let mut events: Vec<f64> = probes.iter().map(|p| p.t).collect();
    events.extend(&settings.snapshot_times);
    let front_times: Vec<f64> = match settings.front_interval {
        Some(h) if h > 0.0 => {
            let n = (t_final / h + 1e-9).floor() as usize;
            (0..=n).map(|k| k as f64 * h).collect()
        }
        Some(h) => return Err(invalid(format!("front interval must be > 0, got {h}"))),
        None => Vec::new(),
    };
    events.extend(&front_times);
    events.push(t_final);
    if settings.startup_time > 0.0 && settings.startup_time < t_final {
        events.push(settings.startup_time);
    }
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let mut stepper = Stepper::new(*params, settings.reaction);
    let mut out = SolveOutput {
        front: FrontTrace::default(),
        samples: Vec::new(),
        snapshots: Vec::new(),
        grid,
        eps,
        log_floor,
        steps: 0,
        rejected: 0,
        max_repair: 0.0,
    };
    let mut recorded: Vec<Option<ProbeSample>> = vec![None; probes.len()];

    // The smoothed step relaxes on the time scale eps^2 / sigma^2; the
    // first steps resolve it and then grow geometrically.
    let mut dt = if settings.startup_time > 0.0 {
        grid.dt.min(STARTUP_DT_FRACTION * eps * eps / params.sigma2)
    } else {
        grid.dt
    };
    for &te in &events {
        while te - field.time > 1e-12 * te.max(1.0) {
            let h = dt.min(te - field.time);
            stepper.scheme = if field.time < settings.startup_time {
                Scheme::Ratio
            } else {
                Scheme::Log
            };
            let limit = match stepper.scheme {
                // Unconditionally stable; only non-finite proposals are retried.
                Scheme::Ratio => f64::MAX,
                Scheme::Log => settings.delta_target,
            };
            let delta = stepper.propose(&field, h);
            if !(delta <= limit) {
                out.rejected += 1;
                dt = 0.5 * h;
                if dt < 1e-14 * te.max(1.0) {
                    return Err(Error::Instability {
                        time: field.time,
                        max_delta: delta,
                    });
                }
                continue;
            }
            let stats = stepper.commit(&mut field, h, delta)?;
            out.steps += 1;
            out.max_repair = out.max_repair.max(stats.repair);
            // Grow only with headroom so accepted and rejected steps do not alternate.
            if h == dt && delta <= 0.25 * limit {
                let growth = match stepper.scheme {
                    Scheme::Ratio => STARTUP_GROWTH,
                    Scheme::Log => 2.0,
                };
                dt = (growth * dt).min(grid.dt);
            }
        }
        field.time = te;

        for (slot, p) in recorded.iter_mut().zip(probes) {
            if slot.is_none() && (p.t - te).abs() <= 1e-12 * te.max(1.0) {
                let x = velocity_from_alpha(p.alpha, params) * p.t;
                *slot = Some(ProbeSample {
                    alpha: p.alpha,
                    t: p.t,
                    x_probe: x,
                    ln_u: field.interpolate(x)?,
                });
            }
        }
        if front_times.iter().any(|&f| (f - te).abs() <= 1e-12 * te.max(1.0)) {
            out.front.samples.push((te, front_position(&field)?));
        }
        if settings
            .snapshot_times
            .iter()
            .any(|&s| (s - te).abs() <= 1e-12 * te.max(1.0))
        {
            out.snapshots.push(field.clone());
        }
    }

    out.samples = recorded.into_iter().map(|s| s.expect("every probe time is an event")).collect();
    Ok(out)
}

/// One CSV row of probe output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkppRow {
    pub alpha: f64,
    pub t: f64,
    pub x_probe: f64,
    pub ln_u: f64,
    pub dx: f64,
    pub dt: f64,
    pub eps: f64,
}

impl FkppRow {
    pub const HEADER: [&'static str; 7] = ["alpha", "t", "x_probe", "ln_u", "dx", "dt", "eps"];

    pub fn rows(out: &SolveOutput) -> Vec<FkppRow> {
        out.samples
            .iter()
            .map(|s| FkppRow {
                alpha: s.alpha,
                t: s.t,
                x_probe: s.x_probe,
                ln_u: s.ln_u,
                dx: out.grid.dx,
                dt: out.grid.dt,
                eps: out.eps,
            })
            .collect()
    }

    pub fn values(&self) -> [f64; 7] {
        [self.alpha, self.t, self.x_probe, self.ln_u, self.dx, self.dt, self.eps]
    }
}
