//! Inference on within-pair differences.

use serde::Serialize;

use super::PsmError;
use crate::dist::{normal_two_sided_p, student_t_quantile, t_two_sided_p, Z_975};
use crate::scalar::{mean, sample_variance, Scalar};

/// Largest number of nonzero differences for which the Wilcoxon null
/// distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedInference<T> {
    pub n_pairs: usize,
    pub mean_diff: T,
    pub ci_low: T,
    pub ci_high: T,
    pub t_stat: T,
    pub t_p: T,
    pub wilcoxon_p: T,
    pub wilcoxon_exact: bool,
}

/// Mean within-pair difference with a t interval on `n − 1` df, a paired t
/// test and the Wilcoxon signed-rank test.
pub fn paired_inference<T: Scalar>(diffs: &[T]) -> Result<PairedInference<T>, PsmError> {
    let n = diffs.len();
    if n < 2 {
        return Err(PsmError::TooFewPairs(n));
    }
    let m = mean(diffs);
    let sd = sample_variance(diffs).max(T::zero()).sqrt();
    let se = sd / T::of_usize(n).sqrt();
    let q = T::of(student_t_quantile(0.975, (n - 1) as f64));
    let (t_stat, t_p) = if se > T::zero() {
        let t = m / se;
        (t, T::of(t_two_sided_p(t.as_f64(), (n - 1) as f64)))
    } else if m == T::zero() {
        (T::zero(), T::one())
    } else {
        (m.signum() * T::infinity(), T::zero())
    };
    let (wilcoxon_p, wilcoxon_exact) = wilcoxon_signed_rank(diffs);
    Ok(PairedInference {
        n_pairs: n,
        mean_diff: m,
        ci_low: m - q * se,
        ci_high: m + q * se,
        t_stat,
        t_p,
        wilcoxon_p,
        wilcoxon_exact,
    })
}

/// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped
/// and tied magnitudes get average ranks. Exact enumeration up to
/// [`WILCOXON_EXACT_MAX`] nonzero differences, otherwise the normal
/// approximation with tie and continuity corrections. Returns the p-value
/// and whether it is exact.
pub fn wilcoxon_signed_rank<T: Scalar>(diffs: &[T]) -> (T, bool) {
    let mut nz: Vec<T> = diffs.iter().copied().filter(|d| *d != T::zero()).collect();
    let n = nz.len();
    if n == 0 {
        return (T::one(), true);
    }
    nz.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite differences"));

    // Doubled average ranks are integers; tie groups recorded for the variance.
    let mut rank2 = vec![0usize; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        for r in rank2.iter_mut().take(j + 1).skip(i) {
            *r = i + j + 2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: usize = nz.iter().zip(&rank2).filter(|(d, _)| **d > T::zero()).map(|(_, &r)| r).sum();

    if n <= WILCOXON_EXACT_MAX {
        let total: usize = rank2.iter().sum();
        let mut dist = vec![0.0f64; total + 1];
        dist[0] = 1.0;
        for &r in &rank2 {
            for s in (r..=total).rev() {
                dist[s] += dist[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = dist[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = dist[w2..].iter().sum::<f64>() / all;
        (T::of((2.0 * lower.min(upper)).min(1.0)), true)
    } else {
        let nf = n as f64;
        let w = w2 as f64 / 2.0;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            return (T::one(), false);
        }
        let z = ((w - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (T::of(normal_two_sided_p(z)), false)
    }
}

/// Conditional odds ratio from discordant matched pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedOddsRatio {
    /// Pairs with treated = 1, control = 0.
    pub b: usize,
    /// Pairs with treated = 0, control = 1.
    pub c: usize,
    /// `None` when `b` or `c` is zero.
    pub odds_ratio: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl MatchedOddsRatio {
    pub fn is_defined(&self) -> bool {
        self.odds_ratio.is_some()
    }
}

/// `b / c` with the interval `exp(ln OR ± 1.96·√(1/b + 1/c))`.
pub fn matched_odds_ratio(outcomes: &[(bool, bool)]) -> MatchedOddsRatio {
    let b = outcomes.iter().filter(|&&(t, c)| t && !c).count();
    let c = outcomes.iter().filter(|&&(t, c)| !t && c).count();
    if b == 0 || c == 0 {
        return MatchedOddsRatio { b, c, odds_ratio: None, ci_low: None, ci_high: None };
    }
    let or = b as f64 / c as f64;
    let half = Z_975 * (1.0 / b as f64 + 1.0 / c as f64).sqrt();
    MatchedOddsRatio {
        b,
        c,
        odds_ratio: Some(or),
        ci_low: Some((or.ln() - half).exp()),
        ci_high: Some((or.ln() + half).exp()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_pair_interval() {
        let r = paired_inference(&[1.0f64, 2.0, 3.0]).unwrap();
        assert_eq!(r.mean_diff, 2.0);
        assert!((r.ci_low + 0.4845).abs() < 1e-3);
        assert!((r.ci_high - 4.4845).abs() < 1e-3);
    }

    #[test]
    fn all_zero_differences() {
        let r = paired_inference(&[0.0; 6]).unwrap();
        assert_eq!((r.mean_diff, r.ci_low, r.ci_high), (0.0, 0.0, 0.0));
        assert_eq!(r.wilcoxon_p, 1.0);
        assert_eq!(r.t_p, 1.0);
    }

    #[test]
    fn exact_wilcoxon_all_positive() {
        let (p, exact) = wilcoxon_signed_rank(&[1.0f64, 2.0, 3.0, 4.0, 5.0]);
        assert!(exact);
        assert!((p - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn exact_wilcoxon_small_table() {
        // n = 6, W+ = 3: P(W+ <= 3) = 5/64 by enumeration.
        let (p, _) = wilcoxon_signed_rank(&[1.0f64, 2.0, -3.0, -4.0, -5.0, -6.0]);
        assert!((p - 10.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn normal_approximation_above_threshold() {
        let d: Vec<f64> = (1..=40).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let (p, exact) = wilcoxon_signed_rank(&d);
        assert!(!exact);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn too_few_pairs() {
        assert_eq!(paired_inference(&[1.0]).unwrap_err(), PsmError::TooFewPairs(1));
    }

    #[test]
    fn discordant_odds_ratio() {
        let mut v = vec![(true, false); 6];
        v.extend(vec![(false, true); 3]);
        v.extend(vec![(true, true); 4]);
        let r = matched_odds_ratio(&v);
        assert_eq!(r.odds_ratio, Some(2.0));
        assert!(r.ci_low.unwrap() < 2.0 && r.ci_high.unwrap() > 2.0);

        let r = matched_odds_ratio(&[(false, true), (false, false)]);
        assert!(!r.is_defined());
        assert_eq!(r.b, 0);
    }
}
