//! Slope fits of `-ln P` against `a t + b ln t + c`, from solver or
//! estimator CSVs.

use std::collections::HashMap;
use std::path::Path;

use bbm_ldp::fkpp::{fit_tail_series, LinearFit, TailSeries};
use bbm_ldp::psi;
use bbm_ldp::rates::prefactor_exponent;
use bbm_ldp::RHO;

use crate::error::CliError;
use crate::table::Cell;

/// Relative slope error accepted against `psi(alpha)`.
pub const SLOPE_TOLERANCE: f64 = 0.05;

pub const HEADER: [&str; 14] = [
    "source",
    "alpha",
    "n_points",
    "a",
    "se_a",
    "b",
    "se_b",
    "c",
    "se_c",
    "psi_reference",
    "relative_slope_error",
    "prefactor_b_reference",
    "slope_check",
    "prefactor_sign",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// `fkpp`, or the estimator name for Monte Carlo input.
    pub source: String,
    pub alpha: f64,
    pub n_points: usize,
    pub fit: LinearFit,
    /// Recomputed from `alpha`, never read from the input.
    pub psi_reference: f64,
    pub relative_slope_error: f64,
    pub prefactor_b_reference: f64,
}

impl FitReport {
    pub fn slope_pass(&self) -> bool {
        self.relative_slope_error <= SLOPE_TOLERANCE
    }

    /// Whether `b` has the sign of the conjectured prefactor term; only
    /// meaningful between the kinks.
    pub fn prefactor_sign(&self) -> &'static str {
        if !(self.alpha > -RHO && self.alpha < 1.0) {
            "n/a"
        } else if self.fit.b.signum() == self.prefactor_b_reference.signum() {
            "consistent"
        } else {
            "inconsistent"
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let f = &self.fit;
        vec![
            self.source.as_str().into(),
            self.alpha.into(),
            self.n_points.into(),
            f.a.into(),
            f.se_a.into(),
            f.b.into(),
            f.se_b.into(),
            f.c.into(),
            f.se_c.into(),
            self.psi_reference.into(),
            self.relative_slope_error.into(),
            self.prefactor_b_reference.into(),
            (if self.slope_pass() { "PASS" } else { "FAIL" }).into(),
            self.prefactor_sign().into(),
        ]
    }
}

/// Fits every `(source, alpha)` series in `path`, keeping rows whose `t`
/// is in `t_list`. Series come out in order of first appearance.
pub fn fit_csv(path: &Path, t_list: &[f64]) -> Result<Vec<FitReport>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::io(&format!("cannot read {}", path.display()), e))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::io(&format!("cannot read {}", path.display()), e))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |what: &str| {
        CliError::config(format!("{} lacks column(s) {what}", path.display())).with_reason("missing-columns")
    };
    let alpha_col = col("alpha").ok_or_else(|| missing("alpha"))?;
    let t_col = col("t").ok_or_else(|| missing("t"))?;
    let (value_col, source_col) = match (col("ln_u"), col("log_p_hat")) {
        (Some(c), _) => (c, None),
        (None, Some(c)) => (c, Some(col("estimator").ok_or_else(|| missing("estimator"))?)),
        (None, None) => return Err(missing("ln_u or log_p_hat")),
    };

    let mut order: Vec<(String, u64)> = Vec::new();
    let mut series: HashMap<(String, u64), Vec<(f64, f64)>> = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(&format!("cannot read {}", path.display()), e))?;
        let num = |c: usize| -> Result<f64, CliError> {
            let field = record.get(c).unwrap_or("");
            field.parse::<f64>().map_err(|_| {
                CliError::config(format!("{} row {}: cannot parse {field:?}", path.display(), line + 2))
            })
        };
        let (alpha, t, value) = (num(alpha_col)?, num(t_col)?, num(value_col)?);
        if !t_list.iter().any(|&s| (s - t).abs() <= 1e-9 * s.abs().max(1.0)) || !value.is_finite() {
            continue;
        }
        let source = source_col.map_or("fkpp", |c| record.get(c).unwrap_or("")).to_string();
        let key = (source, alpha.to_bits());
        if !series.contains_key(&key) {
            order.push(key.clone());
        }
        series.entry(key).or_default().push((t, value));
    }
    if order.is_empty() {
        return Err(CliError::config(format!("{} has no finite rows at the requested times", path.display()))
            .with_reason("insufficient-samples"));
    }

    order
        .into_iter()
        .map(|key| {
            let mut samples = series.remove(&key).expect("key recorded");
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            let alpha = f64::from_bits(key.1);
            let n_points = samples.len();
            let fit = fit_tail_series(&TailSeries { alpha, samples, fit: None }, true)?;
            let psi_reference = psi(alpha).rate;
            Ok(FitReport {
                source: key.0,
                alpha,
                n_points,
                fit,
                psi_reference,
                relative_slope_error: ((fit.a - psi_reference) / psi_reference).abs(),
                prefactor_b_reference: -prefactor_exponent(),
            })
        })
        .collect()
}
