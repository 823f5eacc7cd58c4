//! Experiment configuration: a JSON document, command-line flags, and the
//! defaults, merged with precedence flags > file > defaults.

use std::path::{Path, PathBuf};

use bbm_ldp::mc::{DEFAULT_MAX_PARTICLES, DEFAULT_NO_BRANCH_FRACTION};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Rate,
    TauOpt,
    FkppRate,
    McTail,
    ScenarioLb,
    Sweep,
    Fit,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Rate => "rate",
            Kind::TauOpt => "tau_opt",
            Kind::FkppRate => "fkpp_rate",
            Kind::McTail => "mc_tail",
            Kind::ScenarioLb => "scenario_lb",
            Kind::Sweep => "sweep",
            Kind::Fit => "fit",
        }
    }

    fn default_alphas(&self) -> Vec<f64> {
        match self {
            // psi on a grid, for plotting.
            Kind::Rate => (0..=450).map(|k| -3.0 + 0.01 * k as f64).collect(),
            _ => vec![0.0],
        }
    }

    fn default_t_list(&self) -> Vec<f64> {
        match self {
            Kind::Rate | Kind::Sweep => Vec::new(),
            Kind::TauOpt => vec![500.0],
            Kind::FkppRate | Kind::Fit => vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            Kind::McTail | Kind::ScenarioLb => vec![4.0],
        }
    }

    /// Kinds that only make sense below the critical velocity.
    fn lower_deviation(&self) -> bool {
        matches!(self, Kind::TauOpt | Kind::FkppRate | Kind::McTail | Kind::ScenarioLb)
    }
}

/// One layer of configuration; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub kind: Option<Kind>,
    pub sigma2: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    /// Shorthand for a one-element `t_list`.
    pub t: Option<f64>,
    pub t_list: Option<Vec<f64>>,
    pub n_trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub no_branch_fraction: Option<f64>,
    pub max_particles: Option<usize>,
    pub input: Option<PathBuf>,
    pub check: Option<bool>,
    pub entries: Option<Vec<PartialConfig>>,
}

macro_rules! overlay_fields {
    ($hi:ident, $lo:ident, $($f:ident),*) => {
        PartialConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set here win over those of `lower`.
    pub fn overlay(self, lower: PartialConfig) -> PartialConfig {
        let hi = self.normalized();
        let lo = lower.normalized();
        overlay_fields!(
            hi, lo, kind, sigma2, alphas, t, t_list, n_trials, seed, out, workers, dx, dt, eps,
            no_branch_fraction, max_particles, input, check, entries
        )
    }

    /// Folds `t` into `t_list`. Setting both in one layer is left for
    /// [`PartialConfig::resolve`] to reject.
    fn normalized(mut self) -> PartialConfig {
        if self.t_list.is_none() {
            if let Some(t) = self.t.take() {
                self.t_list = Some(vec![t]);
            }
        }
        self
    }

    /// Applies defaults and validates.
    pub fn resolve(self, kind: Kind) -> Result<ExperimentConfig, CliError> {
        if self.t.is_some() && self.t_list.is_some() {
            return Err(CliError::config("set either t or t_list, not both"));
        }
        let this = self.normalized();
        if let Some(k) = this.kind {
            if k != kind {
                return Err(CliError::config(format!(
                    "config kind {} does not match subcommand {}",
                    k.as_str(),
                    kind.as_str()
                )));
            }
        }
        let cfg = ExperimentConfig {
            kind,
            sigma2: this.sigma2.unwrap_or(1.0),
            alphas: this.alphas.unwrap_or_else(|| kind.default_alphas()),
            t_list: this.t_list.unwrap_or_else(|| kind.default_t_list()),
            n_trials: this.n_trials.unwrap_or(100_000),
            seed: this.seed.unwrap_or(1),
            out: this.out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.as_str()))),
            dx: this.dx.unwrap_or(0.1),
            dt: this.dt,
            eps: this.eps,
            no_branch_fraction: this.no_branch_fraction.unwrap_or(DEFAULT_NO_BRANCH_FRACTION),
            max_particles: this.max_particles.unwrap_or(DEFAULT_MAX_PARTICLES),
            input: this.input,
            check: this.check.unwrap_or(false),
            entries: Vec::new(),
        };
        // A sweep is validated once its entries are attached.
        if kind != Kind::Sweep {
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

/// A fully resolved run; this is what manifests record and replays rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub sigma2: f64,
    pub alphas: Vec<f64>,
    pub t_list: Vec<f64>,
    pub n_trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub dx: f64,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub no_branch_fraction: f64,
    pub max_particles: usize,
    pub input: Option<PathBuf>,
    pub check: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<ExperimentConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::config(msg));
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be > 0, got {}", self.sigma2));
        }
        if self.kind != Kind::Sweep && self.kind != Kind::Fit && self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return bad(format!("alphas must be finite, got {a}"));
        }
        if self.kind.lower_deviation() {
            if let Some(a) = self.alphas.iter().find(|&&a| a >= 1.0) {
                return bad(format!("{} needs alphas < 1, got {a}", self.kind.as_str()));
            }
        }
        let needs_times = !matches!(self.kind, Kind::Rate | Kind::Sweep);
        if needs_times && self.t_list.is_empty() {
            return bad(format!("{} needs a non-empty t_list", self.kind.as_str()));
        }
        if let Some(t) = self.t_list.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return bad(format!("times must be > 0, got {t}"));
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("t_list must be strictly increasing".into());
        }
        if matches!(self.kind, Kind::McTail | Kind::ScenarioLb) && self.n_trials < 100 {
            return bad(format!("n_trials must be >= 100, got {}", self.n_trials));
        }
        if !(self.dx > 0.0) {
            return bad(format!("dx must be > 0, got {}", self.dx));
        }
        if self.kind == Kind::Fit && self.input.is_none() {
            return bad("fit needs an input CSV".into());
        }
        if self.kind == Kind::Sweep && self.entries.is_empty() {
            return bad("sweep needs at least one entry".into());
        }
        for e in &self.entries {
            if e.kind == Kind::Sweep {
                return bad("sweeps cannot nest".into());
            }
            e.validate()?;
        }
        Ok(())
    }

    /// Seeds that influence the output.
    pub fn seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = match self.kind {
            Kind::McTail | Kind::ScenarioLb => vec![self.seed],
            Kind::Sweep => self.entries.iter().flat_map(|e| e.seeds()).collect(),
            _ => Vec::new(),
        };
        seeds.dedup();
        seeds
    }
}

/// Merges flags, an optional config file and defaults for `kind`.
///
/// Sweep entries take flags first, then their own fields, then the
/// top level of the file.
pub fn resolve(kind: Kind, flags: PartialConfig, file: Option<PartialConfig>) -> Result<ExperimentConfig, CliError> {
    let mut file = file.unwrap_or_default();
    let entries = file.entries.take();
    if flags.entries.is_some() {
        return Err(CliError::config("entries can only come from a config file"));
    }
    let base = flags.clone().overlay(file.clone());
    let mut cfg = base.clone().resolve(kind)?;
    if kind == Kind::Sweep {
        let entries = entries.ok_or_else(|| CliError::config("sweep needs an entries list"))?;
        let mut resolved = Vec::with_capacity(entries.len());
        for (i, entry) in entries.into_iter().enumerate() {
            if entry.entries.is_some() {
                return Err(CliError::config("sweeps cannot nest"));
            }
            let entry_kind = flags
                .kind
                .or(entry.kind)
                .ok_or_else(|| CliError::config(format!("sweep entry {i} has no kind")))?;
            let mut layered = flags.clone().overlay(entry).overlay(PartialConfig {
                kind: None,
                ..file.clone()
            });
            layered.kind = Some(entry_kind);
            let mut e = layered.resolve(entry_kind)?;
            e.out = cfg.out.clone();
            resolved.push(e);
        }
        cfg.entries = resolved;
        cfg.validate()?;
    } else if entries.is_some() {
        return Err(CliError::config("entries are only allowed for sweep"));
    }
    Ok(cfg)
}
