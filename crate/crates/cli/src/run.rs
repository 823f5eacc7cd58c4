//! One table per experiment kind. All numbers come from the core crate.

use bbm_ldp::fkpp::{self, FkppRow, Probe, SolverSettings};
use bbm_ldp::mc::{estimate_tail, scenario_estimate, Estimate, McRow, ScenarioConfig, SimConfig};
use bbm_ldp::rates::{chen_lower_bound, scenario_geometry};
use bbm_ldp::varopt::{maximize, ObjectiveSpec};
use bbm_ldp::{psi, velocity_from_alpha, ModelParams};

use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;
use crate::fit;
use crate::table::{Cell, Table};

pub const RATE_HEADER: [&str; 5] = ["alpha", "v", "psi", "regime", "chen_bound"];
pub const TAU_OPT_HEADER: [&str; 9] = [
    "alpha",
    "v",
    "t",
    "tau_star",
    "tau_fraction",
    "log_value",
    "empirical_rate",
    "psi",
    "tau_fraction_reference",
];

pub fn header(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Rate => &RATE_HEADER,
        Kind::TauOpt => &TAU_OPT_HEADER,
        Kind::FkppRate => &FkppRow::HEADER,
        Kind::McTail | Kind::ScenarioLb => &McRow::HEADER,
        Kind::Fit => &fit::HEADER,
        Kind::Sweep => &[],
    }
}

/// Runs a single (non-sweep) experiment on the current worker pool.
pub fn run_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let params = ModelParams::new(cfg.sigma2)?;
    let mut table = Table::new(header(cfg.kind));
    match cfg.kind {
        Kind::Rate => {
            for &alpha in &cfg.alphas {
                let r = psi(alpha);
                let chen = chen_lower_bound(alpha).unwrap_or(f64::NAN);
                table.push(vec![
                    alpha.into(),
                    velocity_from_alpha(alpha, &params).into(),
                    r.rate.into(),
                    r.regime.as_str().into(),
                    chen.into(),
                ]);
            }
        }
        Kind::TauOpt => {
            for &alpha in &cfg.alphas {
                let v = velocity_from_alpha(alpha, &params);
                let reference = scenario_geometry(alpha, &params)?.tau_fraction;
                for &t in &cfg.t_list {
                    let opt = maximize(&ObjectiveSpec::lower_bound_form(v, t, cfg.sigma2)?)?;
                    table.push(vec![
                        alpha.into(),
                        v.into(),
                        t.into(),
                        opt.tau_star.into(),
                        (opt.tau_star / t).into(),
                        opt.log_value.into(),
                        opt.empirical_rate.into(),
                        psi(alpha).rate.into(),
                        reference.into(),
                    ]);
                }
            }
        }
        Kind::FkppRate => {
            let probes: Vec<Probe> = cfg
                .alphas
                .iter()
                .flat_map(|&alpha| cfg.t_list.iter().map(move |&t| Probe { alpha, t }))
                .collect();
            let settings = SolverSettings {
                dx: cfg.dx,
                dt: cfg.dt,
                eps: cfg.eps,
                front_interval: None,
                ..SolverSettings::default()
            };
            let t_final = *cfg.t_list.last().expect("validated non-empty");
            let out = fkpp::solve(&params, t_final, &probes, &settings)?;
            for row in FkppRow::rows(&out) {
                table.push(row.values().iter().map(|&x| Cell::from(x)).collect());
            }
        }
        Kind::McTail | Kind::ScenarioLb => {
            for &alpha in &cfg.alphas {
                for &t in &cfg.t_list {
                    let mut sim = SimConfig::new(params, t, cfg.seed)?;
                    sim.max_particles = cfg.max_particles;
                    let (x, est) = if cfg.kind == Kind::McTail {
                        let x = velocity_from_alpha(alpha, &params) * t;
                        (x, estimate_tail(&sim, x, cfg.n_trials)?)
                    } else {
                        let scen = ScenarioConfig::from_alpha(alpha, &params, t, cfg.no_branch_fraction)?;
                        (scen.threshold, scenario_estimate(&sim, &scen, cfg.n_trials)?)
                    };
                    table.push(mc_row(alpha, t, x, &est));
                }
            }
        }
        Kind::Fit => {
            let input = cfg.input.as_ref().expect("validated");
            for report in fit::fit_csv(input, &cfg.t_list)? {
                table.push(report.cells());
            }
        }
        Kind::Sweep => return Err(CliError::config("sweep has no single table")),
    }
    Ok(table)
}

fn mc_row(alpha: f64, t: f64, x: f64, est: &Estimate) -> Vec<Cell> {
    vec![
        est.estimator.as_str().into(),
        alpha.into(),
        t.into(),
        x.into(),
        est.n_trials.into(),
        est.p_hat.into(),
        est.log_p_hat.into(),
        est.stderr.into(),
        est.ess.into(),
        est.seed.into(),
    ]
}
