//! Thin wrappers around the special functions the crate relies on.

use statrs::function::erf;
use statrs::function::gamma;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Regularized lower incomplete gamma function P(a, x).
#[inline]
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma::gamma_lr(a, x)
    }
}

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Natural log of the binomial coefficient C(n, k), for n >= k >= 0.
#[inline]
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(n >= k);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn normal_cdf_reference_points() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 5e-12);
        assert_relative_eq!(normal_cdf(-8.0), 6.220_960_574_271_786e-16, max_relative = 1e-9);
    }

    #[test]
    fn reg_lower_gamma_reference_points() {
        // exponential median
        assert_abs_diff_eq!(reg_lower_gamma(1.0, std::f64::consts::LN_2), 0.5, epsilon = 1e-14);
        // series evaluation, independent of any saddlepoint code
        assert_abs_diff_eq!(reg_lower_gamma(8.0, 8.0), 0.547_039_190_513_005_8, epsilon = 1e-12);
        assert_eq!(reg_lower_gamma(2.5, 0.0), 0.0);
        assert_eq!(reg_lower_gamma(2.5, -1.0), 0.0);
    }

    #[test]
    fn ln_binomial_matches_direct() {
        assert_abs_diff_eq!(ln_binomial(5, 2).exp(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_binomial(1, 0).exp(), 1.0, epsilon = 1e-15);
        // large arguments stay finite in log space
        assert!(ln_binomial(5000, 2500).is_finite());
    }
}
