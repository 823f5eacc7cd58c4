/// Pairwise (cascade) summation with a fixed split, so the result depends
/// only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// One-sided Kolmogorov-Smirnov statistics against a continuous CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// `sup (F_n - F)`.
    pub d_plus: f64,
    /// `sup (F - F_n)`.
    pub d_minus: f64,
    pub n: usize,
}

impl KsResult {
    /// Asymptotic p-value `exp(-2 n d^2)` of a one-sided statistic.
    pub fn p_value(&self, d: f64) -> f64 {
        (-2.0 * self.n as f64 * d * d).exp()
    }

    pub fn p_plus(&self) -> f64 {
        self.p_value(self.d_plus)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_value(self.d_minus)
    }
}

pub fn ks_one_sided(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d_plus = d_plus.max((i + 1) as f64 / n - f);
        d_minus = d_minus.max(f - i as f64 / n);
    }
    KsResult {
        d_plus,
        d_minus,
        n: xs.len(),
    }
}
