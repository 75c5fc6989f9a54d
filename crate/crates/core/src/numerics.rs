//! Log-space helpers.

/// `ln(sum(exp(x)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Two-term variant of [`log_sum_exp`].
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Γ` at the integers and half-integers `0.5, 1, 1.5, ...`, tabulated up to
/// a fixed count so Beta–Binomial factors over integer counts are lookups.
#[derive(Clone, Debug)]
pub(crate) struct HalfIntegerLnGamma {
    // entry i holds ln Γ((i + 1) / 2)
    table: Vec<f64>,
}

impl HalfIntegerLnGamma {
    pub fn new(max_count: usize) -> Self {
        let len = 2 * max_count + 4;
        let table = (0..len)
            .map(|i| libm::lgamma((i as f64 + 1.0) * 0.5))
            .collect();
        HalfIntegerLnGamma { table }
    }

    /// `ln Γ(n + 1/2)`.
    #[inline]
    pub fn at_half(&self, n: usize) -> f64 {
        self.table[2 * n]
    }

    /// `ln Γ(n + 1)`.
    #[inline]
    pub fn at_int(&self, n: usize) -> f64 {
        self.table[2 * n + 1]
    }

    /// `ln D(1/2 + a, 1/2 + b) - ln D(1/2, 1/2)`.
    #[inline]
    pub fn centered_beta_ratio(&self, a: usize, b: usize) -> f64 {
        self.at_half(a) + self.at_half(b) - self.at_int(a + b) - std::f64::consts::PI.ln()
    }
}
