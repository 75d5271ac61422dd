//! Scalar special functions and log-space helpers.
//!
//! `core` has no transcendental functions, so everything goes through `libm`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(exp(x) - 1)` for `x > 0`, without overflow for large `x`.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + ln_1p(-exp(-x))
    } else {
        ln(exp_m1(x))
    }
}

/// Digamma function for `x > 0`.
///
/// Shifts the argument above 6 with `psi(x) = psi(x + 1) - 1/x`, then sums
/// the asymptotic expansion through the `x^-14` term.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma argument must be positive, got {x}");
    let mut x = x;
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli coefficients B_2n / (2n).
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + ln(x) - 0.5 * inv - series
}

/// Numerically stable `ln(sum(exp(xs)))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Streaming accumulator for `ln(sum(exp(x_i)))` over values that do not fit
/// in memory at once.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * exp(self.max - x) + 1.0;
            self.max = x;
        } else {
            self.scaled += exp(x - self.max);
        }
    }

    pub fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.scaled)
        }
    }
}

/// Replaces log-weights with their softmax in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = exp(*v - max);
        total += *v;
    }
    for v in logits.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn digamma_reference_values() {
        assert!(rel(digamma(1.0), -EULER_GAMMA) < 1e-12);
        assert!(rel(digamma(2.0), 1.0 - EULER_GAMMA) < 1e-12);
        assert!(rel(digamma(0.5), -EULER_GAMMA - 2.0 * core::f64::consts::LN_2) < 1e-12);
        assert!(rel(digamma(10.0), 2.251_752_589_066_721) < 1e-12);
        assert!(rel(digamma(0.1), -10.423_754_940_411_076) < 1e-12);
        assert!(rel(digamma(100.0), 4.600_161_852_738_087) < 1e-12);
    }

    #[test]
    fn digamma_recurrence_holds() {
        for &x in &[0.01, 0.3, 1.7, 5.5, 6.2, 42.0] {
            let lhs = digamma(x + 1.0);
            let rhs = digamma(x) + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn streaming_log_sum_exp_matches_batch() {
        let xs = [-1000.0, -3.5, 2.0, 700.0, 699.0, f64::NEG_INFINITY];
        let mut acc = LogSumExp::default();
        for &x in &xs {
            acc.push(x);
        }
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-12);
        assert_eq!(LogSumExp::default().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_expm1_branches_agree() {
        for &x in &[1e-8, 0.5, 29.9, 30.1, 100.0] {
            let naive = if x < 700.0 { ln(exp(x) - 1.0) } else { x };
            assert!(rel(ln_expm1(x), naive) < 1e-7, "x = {x}");
        }
        assert!(rel(ln_expm1(1e-8), ln(1e-8)) < 1e-7);
    }
}
