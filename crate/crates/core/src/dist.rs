//! Reference distributions for test statistics.
//!
//! The Student t CDF is expressed through the regularized incomplete beta
//! function; quantiles are found by bisection on the CDF.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Student t CDF with `df > 0` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| ≥ |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Inverse of [`student_t_cdf`] for `p ∈ (0, 1)`.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Trigamma function `ψ'(x)` for `x > 0`: upward recurrence to `x ≥ 10`,
/// then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "trigamma defined here for positive arguments");
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + x2 / x * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}

/// Upper-tail standard normal quantile at 97.5 %, used for Wald intervals.
pub const Z_975: f64 = 1.96;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles_match_tables() {
        // Classic two-sided 95 % critical values.
        assert!((student_t_quantile(0.975, 1.0) - 12.706_204_736).abs() < 1e-6);
        assert!((student_t_quantile(0.975, 2.0) - 4.302_652_730).abs() < 1e-6);
        assert!((student_t_quantile(0.975, 10.0) - 2.228_138_852).abs() < 1e-6);
        assert!((student_t_quantile(0.025, 10.0) + 2.228_138_852).abs() < 1e-6);
    }

    #[test]
    fn t_cdf_df1_is_cauchy() {
        for &t in &[-3.0, -0.5, 0.0, 0.7, 5.0] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12);
        }
    }

    #[test]
    fn trigamma_reference_values() {
        // ψ'(1) = π²/6, ψ'(1/2) = π²/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
        // recurrence ψ'(x) = ψ'(x + 1) + 1/x²
        assert!((trigamma(7.3) - trigamma(8.3) - 1.0 / (7.3f64 * 7.3)).abs() < 1e-14);
    }

    #[test]
    fn normal_reference_values() {
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-11);
        assert!((normal_two_sided_p(1.959_963_984_540_054) - 0.05).abs() < 1e-11);
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn two_sided_p_consistent_with_cdf() {
        let (t, df) = (2.1, 7.0);
        let p = t_two_sided_p(t, df);
        assert!((p - 2.0 * (1.0 - student_t_cdf(t, df))).abs() < 1e-12);
    }
}
