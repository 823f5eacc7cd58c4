//! Experiment harness behind the `bbm-ldp` binary.
//!
//! A run resolves an [`ExperimentConfig`], writes one CSV, and records a
//! [`Manifest`] next to it (`out.csv` -> `out.manifest.json`). Replaying a
//! manifest reruns the recorded configuration and compares bytes.

pub mod config;
pub mod error;
pub mod fit;
pub mod run;
pub mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bbm_ldp::mc::with_workers;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Kind, PartialConfig};
pub use error::{Category, CliError};
pub use table::{Cell, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: Kind,
    /// CSV file name, relative to the manifest's directory.
    pub output: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    /// Does not affect the CSV.
    pub workers: usize,
    pub rows: usize,
    pub csv_bytes: u64,
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
    /// Per sweep entry, or a single value.
    pub entry_seconds: Vec<f64>,
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Outcome of a completed run.
#[derive(Debug)]
pub struct Run {
    pub config: ExperimentConfig,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    /// One table per sweep entry, or the single table.
    pub tables: Vec<Table>,
}

impl Run {
    /// Rows of fit tables whose slope check failed.
    pub fn failed_fits(&self) -> usize {
        self.tables
            .iter()
            .filter(|t| t.header == fit::HEADER)
            .flat_map(|t| &t.rows)
            .filter(|r| r[12] == Cell::from("FAIL"))
            .count()
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Resolves flags, the optional config file and defaults, then runs.
pub fn execute(kind: Kind, flags: PartialConfig, config_path: Option<&Path>) -> Result<Run, CliError> {
    let file = config_path.map(PartialConfig::from_file).transpose()?;
    let workers = flags
        .workers
        .or(file.as_ref().and_then(|f| f.workers))
        .unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::config("workers must be >= 1"));
    }
    let mut cfg = config::resolve(kind, flags, file)?;
    absolutize_inputs(&mut cfg)?;
    run_and_record(&cfg, workers)
}

/// Fit inputs are recorded as absolute paths so replays work from anywhere.
fn absolutize_inputs(cfg: &mut ExperimentConfig) -> Result<(), CliError> {
    if let Some(input) = &cfg.input {
        let abs = fs::canonicalize(input)
            .map_err(|e| CliError::io(&format!("cannot open input {}", input.display()), e))?;
        cfg.input = Some(abs);
    }
    cfg.entries.iter_mut().try_for_each(absolutize_inputs)
}

/// Writes the CSV to `cfg.out` and the manifest beside it.
pub fn run_and_record(cfg: &ExperimentConfig, workers: usize) -> Result<Run, CliError> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let (tables, entry_seconds) = produce(cfg, &cfg.out, workers)?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    let csv_bytes = fs::metadata(&cfg.out)
        .map_err(|e| CliError::io("cannot stat output", e))?
        .len();
    let output = cfg
        .out
        .file_name()
        .ok_or_else(|| CliError::config(format!("output path {} has no file name", cfg.out.display())))?
        .to_string_lossy()
        .into_owned();
    let manifest = Manifest {
        tool: "bbm-ldp".into(),
        version: VERSION.into(),
        kind: cfg.kind,
        output,
        config: cfg.clone(),
        seeds: cfg.seeds(),
        workers,
        rows: tables.iter().map(|t| t.rows.len()).sum(),
        csv_bytes,
        started_unix_seconds: started,
        wall_seconds,
        entry_seconds,
    };
    let path = manifest_path(&cfg.out);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))?;
    Ok(Run {
        config: cfg.clone(),
        csv: cfg.out.clone(),
        manifest: path,
        tables,
    })
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Computes the tables and writes the CSV to `dest` atomically.
fn produce(cfg: &ExperimentConfig, dest: &Path, workers: usize) -> Result<(Vec<Table>, Vec<f64>), CliError> {
    let dir = parent_dir(dest);
    let entries: Vec<&ExperimentConfig> = if cfg.kind == Kind::Sweep {
        cfg.entries.iter().collect()
    } else {
        vec![cfg]
    };
    let header = run::header(entries[0].kind);
    if let Some(e) = entries.iter().find(|e| run::header(e.kind) != header) {
        return Err(CliError::config(format!(
            "sweep entries must share a CSV layout: {} and {} differ",
            entries[0].kind.as_str(),
            e.kind.as_str()
        )));
    }

    // Bodies go to per-entry files and are joined in config order.
    let scratch = tempfile::Builder::new()
        .prefix(".bbm-ldp-")
        .tempdir_in(dir)
        .map_err(|e| CliError::io(&format!("cannot create a scratch directory in {}", dir.display()), e))?;
    let results: Vec<Result<(Table, f64), CliError>> = with_workers(workers, || {
        entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                let clock = Instant::now();
                let table = run::run_table(e)?;
                let file = fs::File::create(scratch.path().join(format!("entry-{i:05}.csv")))
                    .map_err(|e| CliError::io("cannot create entry file", e))?;
                table.write_body(std::io::BufWriter::new(file))?;
                Ok((table, clock.elapsed().as_secs_f64()))
            })
            .collect()
    })?;
    let (tables, seconds): (Vec<Table>, Vec<f64>) = results.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();

    let mut joined = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io("cannot create output", e))?;
    {
        let mut w = std::io::BufWriter::new(joined.as_file_mut());
        Table::new(header).write_header(&mut w)?;
        for i in 0..entries.len() {
            let body = fs::read(scratch.path().join(format!("entry-{i:05}.csv")))
                .map_err(|e| CliError::io("cannot read entry file", e))?;
            w.write_all(&body).map_err(|e| CliError::io("cannot write output", e))?;
        }
        w.flush().map_err(|e| CliError::io("cannot write output", e))?;
    }
    joined
        .persist(dest)
        .map_err(|e| CliError::io(&format!("cannot write {}", dest.display()), e.error))?;
    Ok((tables, seconds))
}

#[derive(Debug)]
pub struct Replay {
    pub recorded: PathBuf,
    pub identical: bool,
    /// Where the regenerated CSV was kept, if requested.
    pub kept: Option<PathBuf>,
}

/// Reruns the configuration in a manifest and compares the CSV bytes with
/// the recorded output. With `out`, the regenerated CSV and a fresh
/// manifest are kept there.
pub fn replay(manifest: &Path, out: Option<&Path>, workers: Option<usize>) -> Result<Replay, CliError> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| CliError::io(&format!("cannot read manifest {}", manifest.display()), e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid manifest {}: {e}", manifest.display())))?;
    m.config.validate()?;
    let workers = workers.unwrap_or(m.workers).max(1);
    let recorded = parent_dir(manifest).join(&m.output);
    let want = fs::read(&recorded)
        .map_err(|e| CliError::io(&format!("cannot read recorded output {}", recorded.display()), e))?;

    let (got, kept) = match out {
        Some(path) => {
            let cfg = ExperimentConfig {
                out: path.to_path_buf(),
                ..m.config.clone()
            };
            run_and_record(&cfg, workers)?;
            (fs::read(path).map_err(|e| CliError::io("cannot read replay output", e))?, Some(path.to_path_buf()))
        }
        None => {
            let scratch = tempfile::tempdir().map_err(|e| CliError::io("cannot create a scratch directory", e))?;
            let dest = scratch.path().join("replay.csv");
            produce(&m.config, &dest, workers)?;
            (fs::read(&dest).map_err(|e| CliError::io("cannot read replay output", e))?, None)
        }
    };
    Ok(Replay {
        recorded,
        identical: got == want,
        kept,
    })
}
