use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares coefficients of `y ~ a t + b ln t + c` (or `a t + c`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub se_c: f64,
    pub residual_norm: f64,
    pub with_log_term: bool,
}

/// Fits `y` against `{t, ln t, 1}` via QR.
///
/// Requires at least five samples spanning a factor of four in `t`.
pub fn fit_time_series(samples: &[(f64, f64)], with_log_term: bool) -> Result<LinearFit> {
    if samples.len() < 5 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 5 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(t, y)| !(t > 0.0) || !y.is_finite()) {
        return Err(Error::InsufficientSamples(
            "samples need t > 0 and finite values".into(),
        ));
    }
    let t_lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if t_hi < 4.0 * t_lo {
        return Err(Error::InsufficientSamples(format!(
            "samples span [{t_lo}, {t_hi}], less than a factor 4"
        )));
    }

    let n = samples.len();
    let p = if with_log_term { 3 } else { 2 };
    let x = DMatrix::from_fn(n, p, |i, j| {
        let t = samples[i].0;
        match (with_log_term, j) {
            (_, 0) => t,
            (true, 1) => t.ln(),
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));

    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(Error::RankDeficient)?;

    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let dof = (n - p).max(1) as f64;
    let s2 = rss / dof;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    let cov = &r_inv * r_inv.transpose() * s2;
    let se = |i: usize| cov[(i, i)].max(0.0).sqrt();

    Ok(if with_log_term {
        LinearFit {
            a: beta[0],
            b: beta[1],
            c: beta[2],
            se_a: se(0),
            se_b: se(1),
            se_c: se(2),
            residual_norm: rss.sqrt(),
            with_log_term,
        }
    } else {
        LinearFit {
            a: beta[0],
            b: 0.0,
            c: beta[1],
            se_a: se(0),
            se_b: 0.0,
            se_c: se(1),
            residual_norm: rss.sqrt(),
            with_log_term,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_model() {
        let samples: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let t = 10.0 * k as f64;
                (t, 0.8284 * t - 0.6213 * t.ln() + 1.0)
            })
            .collect();
        let f = fit_time_series(&samples, true).unwrap();
        assert!((f.a - 0.8284).abs() < 1e-9);
        assert!((f.b + 0.6213).abs() < 1e-9);
        assert!((f.c - 1.0).abs() < 1e-9);
        assert!(f.residual_norm < 1e-9);
    }

    #[test]
    fn linear_model_without_log() {
        let samples: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64, 2.0 * k as f64 - 3.0)).collect();
        let f = fit_time_series(&samples, false).unwrap();
        assert!((f.a - 2.0).abs() < 1e-12 && (f.c + 3.0).abs() < 1e-12);
        assert_eq!(f.b, 0.0);
    }

    #[test]
    fn standard_errors_scale_with_noise() {
        let noisy: Vec<(f64, f64)> = (1..=20)
            .map(|k| {
                let t = 5.0 * k as f64;
                (t, 0.5 * t + if k % 2 == 0 { 0.1 } else { -0.1 })
            })
            .collect();
        let f = fit_time_series(&noisy, true).unwrap();
        assert!(f.se_a > 0.0 && f.se_a < 0.01);
        assert!((f.a - 0.5).abs() < 3.0 * f.se_a + 1e-3);
    }

    #[test]
    fn rejects_thin_or_clustered_data() {
        let few: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64 * 10.0, 1.0)).collect();
        assert!(matches!(fit_time_series(&few, true), Err(Error::InsufficientSamples(_))));
        let clustered: Vec<(f64, f64)> = (0..10).map(|k| (10.0 + k as f64 * 0.1, 1.0)).collect();
        assert!(fit_time_series(&clustered, true).is_err());
        let degenerate: Vec<(f64, f64)> = [1.0, 1.0, 1.0, 1.0, 8.0, 8.0]
            .iter()
            .map(|&t| (t, 1.0))
            .collect();
        assert!(matches!(fit_time_series(&degenerate, true), Err(Error::RankDeficient)));
    }
}
