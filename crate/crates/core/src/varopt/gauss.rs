//! Standard normal CDF in log space.


/// For `|z|` at least this, the Mills-ratio continued fraction is used.
const CF_SWITCH: f64 = 2.5;

/// Terms of the continued fraction, evaluated backwards. At `|z| = 2.5`
/// the truncation error is below `1e-19`.
const CF_DEPTH: usize = 100;

/// `ln Phi(z)` for the standard normal CDF `Phi`.
///
/// Finite for every finite `z` and nondecreasing in `z`. Far in the left
/// tail the value is assembled in log space, `-z^2/2 - ln sqrt(2 pi) + ln R(-z)`
/// with `R` the Mills ratio, so it never underflows.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z <= -CF_SWITCH {
        let x = -z;
        -0.5 * x * x - LN_SQRT_2PI + log_mills_ratio(x)
    } else if z < CF_SWITCH {
        (0.5 + normal_pdf(z) * odd_series(z)).ln()
    } else {
        (-(normal_pdf(z) * log_mills_ratio(z).exp())).ln_1p()
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(Q(x) / pdf(x))` for `x > 0`, with `Q` the upper tail, from
/// `Q / pdf = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...))))`.
fn log_mills_ratio(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=CF_DEPTH).rev() {
        f = x + k as f64 / f;
    }
    -f.ln()
}

/// `(Phi(z) - 1/2) / pdf(z) = sum_k z^(2k+1) / (2k+1)!!`; every term has the
/// sign of `z`, so the sum itself is free of cancellation.
fn odd_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum: f64 = 0.0;
    let mut k = 0.0;
    while term.abs() > 1e-17 * sum.abs() {
        sum += term;
        k += 1.0;
        term *= z2 / (2.0 * k + 1.0);
    }
    sum
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}
