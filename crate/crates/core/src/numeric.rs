//! Small numeric helpers shared by the enumeration and Monte Carlo paths.

/// Neumaier compensated accumulator.
///
/// Summation order is the caller's; results are reproducible as long as the
/// order of `add` calls is.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Exact binomial coefficient; `None` on overflow of `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `base^exp` evaluated as `exp(exp * ln(base))` for large exponents.
///
/// Falls back to `powi` when the exponent is small enough to be exact.
pub fn pow_large(base: f64, exp: u64) -> f64 {
    if exp <= i32::MAX as u64 {
        base.powi(exp as i32)
    } else if base <= 0.0 {
        if base == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    } else {
        (exp as f64 * base.ln()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(14, 7), Some(3432));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(64, 32), Some(1_832_624_140_942_590_534));
    }

    #[test]
    fn pow_large_matches_powi() {
        assert_eq!(pow_large(1.5, 2), 2.25);
        // The base itself is only stored to ~1e-16, which moves the result by ~1e-6 here.
        let v = pow_large(1.0 - 1e-10, 3_000_000_000);
        assert!((v - (-0.3f64).exp()).abs() < 1e-6);
        assert_eq!(pow_large(0.5, 3_000_000_000), 0.0);
        assert_eq!(pow_large(0.0, 3_000_000_000), 0.0);
    }
}
