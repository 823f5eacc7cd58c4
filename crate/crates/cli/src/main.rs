use std::path::PathBuf;
use std::process::ExitCode;

use bbm_ldp_cli::{execute, replay, Category, CliError, Kind, PartialConfig, Run};
use clap::{Args, Parser, Subcommand};

const AFTER_HELP: &str = "\
Configuration precedence: command-line flags > JSON config file (--config) > built-in defaults.
BBM_LDP_WORKERS sets the worker count when --workers is absent.

Exit codes: 0 ok, 2 config-invalid, 3 solver-instability, 4 particle-cap,
5 domain-overflow, 6 acceptance-fail (fit --check, replay mismatch).";

const CONFIG_HELP: &str = "\
JSON config file. Fields: kind, sigma2, alphas, t, t_list, n_trials, seed,
out, workers, dx, dt, eps, no_branch_fraction, max_particles, input, check,
entries (sweep only; each entry is a config object with its own kind)";

/// Rates, variational bounds, F-KPP solves and Monte Carlo estimates for
/// the lower deviations of the rightmost particle of branching Brownian motion.
#[derive(Parser)]
#[command(name = "bbm-ldp", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rate psi(alpha) and the Chen lower bound
    Rate(RunArgs),
    /// Optimal first-branching time of the variational lower bound
    TauOpt(RunArgs),
    /// ln u along the rays x = alpha sqrt(2 sigma2) t from the F-KPP solver
    FkppRate(RunArgs),
    /// Plain Monte Carlo estimate of P(X_max(t) <= alpha sqrt(2 sigma2) t)
    McTail(RunArgs),
    /// Scenario (no early branching) Monte Carlo lower bound
    ScenarioLb(RunArgs),
    /// Run the entries of a config file on a worker pool into one CSV
    Sweep(RunArgs),
    /// Fit -ln P ~ a t + b ln t + c per alpha from a solver or estimator CSV
    Fit(FitArgs),
    /// Rerun a manifest and check that the CSV is reproduced byte for byte
    Replay(ReplayArgs),
}

#[derive(Args)]
#[command(after_help = AFTER_HELP)]
struct RunArgs {
    #[arg(long, help = CONFIG_HELP)]
    config: Option<PathBuf>,
    /// Diffusion variance per unit time [default: 1]
    #[arg(long)]
    sigma2: Option<f64>,
    /// Normalized velocities, comma separated or repeated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    /// Single horizon (same as a one-element --t-list)
    #[arg(long, conflicts_with = "t_list")]
    t: Option<f64>,
    /// Strictly increasing horizons, comma separated
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    /// Monte Carlo trials per estimate [default: 100000]
    #[arg(long)]
    n_trials: Option<usize>,
    /// Monte Carlo seed [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the manifest goes next to it [default: <kind>.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long, env = "BBM_LDP_WORKERS")]
    workers: Option<usize>,
    /// F-KPP grid spacing [default: 0.1]
    #[arg(long)]
    dx: Option<f64>,
    /// F-KPP base time step [default: min(dx^2 / (4 sigma2), 0.01)]
    #[arg(long)]
    dt: Option<f64>,
    /// Width of the smoothed initial step [default: dx]
    #[arg(long)]
    eps: Option<f64>,
    /// Pre-branch window below the kink, as a fraction of t [default: 0.95]
    #[arg(long)]
    no_branch_fraction: Option<f64>,
    /// Cap on simultaneously tracked particles per trial
    #[arg(long)]
    max_particles: Option<usize>,
}

impl RunArgs {
    fn into_flags(self) -> (Option<PathBuf>, PartialConfig) {
        let flags = PartialConfig {
            sigma2: self.sigma2,
            alphas: self.alpha,
            t: self.t,
            t_list: self.t_list,
            n_trials: self.n_trials,
            seed: self.seed,
            out: self.out,
            workers: self.workers,
            dx: self.dx,
            dt: self.dt,
            eps: self.eps,
            no_branch_fraction: self.no_branch_fraction,
            max_particles: self.max_particles,
            ..PartialConfig::default()
        };
        (self.config, flags)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    run: RunArgs,
    /// CSV from fkpp-rate (ln_u) or mc-tail / scenario-lb (log_p_hat)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Exit with 6 unless every slope is within 5% of psi(alpha)
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest written next to a CSV
    manifest: PathBuf,
    /// Keep the regenerated CSV (and a fresh manifest) here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: as recorded]
    #[arg(long, env = "BBM_LDP_WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (kind, args, fit) = match command {
        Command::Rate(a) => (Kind::Rate, a, None),
        Command::TauOpt(a) => (Kind::TauOpt, a, None),
        Command::FkppRate(a) => (Kind::FkppRate, a, None),
        Command::McTail(a) => (Kind::McTail, a, None),
        Command::ScenarioLb(a) => (Kind::ScenarioLb, a, None),
        Command::Sweep(a) => (Kind::Sweep, a, None),
        Command::Fit(f) => (Kind::Fit, f.run, Some((f.input, f.check))),
        Command::Replay(r) => return run_replay(r),
    };
    let (config, mut flags) = args.into_flags();
    if let Some((input, check)) = fit {
        flags.input = input;
        flags.check = check.then_some(true);
    }
    let run = execute(kind, flags, config.as_deref())?;
    report(&run);
    let failed = run.failed_fits();
    if run.config.check && failed > 0 {
        return Err(CliError::new(
            Category::AcceptanceFail,
            format!("{failed} fitted slope(s) outside the 5% band"),
        ));
    }
    Ok(())
}

fn report(run: &Run) {
    let rows: usize = run.tables.iter().map(|t| t.rows.len()).sum();
    println!("wrote {} ({rows} rows), manifest {}", run.csv.display(), run.manifest.display());
    for table in run.tables.iter().filter(|t| t.header == bbm_ldp_cli::fit::HEADER) {
        for r in &table.rows {
            let [source, alpha, _, a, _, b, _, _, _, psi, rel, _, check, sign] = &r[..] else {
                continue;
            };
            println!(
                "fit {} alpha={}: {} a={} psi={} rel={} | b={} ({})",
                source.render(),
                alpha.render(),
                check.render(),
                a.render(),
                psi.render(),
                rel.render(),
                b.render(),
                sign.render()
            );
        }
    }
}

fn run_replay(args: ReplayArgs) -> Result<(), CliError> {
    if args.workers == Some(0) {
        return Err(CliError::config("workers must be >= 1"));
    }
    let r = replay(&args.manifest, args.out.as_deref(), args.workers)?;
    if !r.identical {
        return Err(CliError::new(
            Category::AcceptanceFail,
            format!("replay differs from {}", r.recorded.display()),
        ));
    }
    println!("replay identical to {}", r.recorded.display());
    if let Some(kept) = r.kept {
        println!("regenerated CSV kept at {}", kept.display());
    }
    Ok(())
}
