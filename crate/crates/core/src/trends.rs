//! Per-neighborhood linear trends over calendar years.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::t_two_sided_p;
use crate::scalar::Scalar;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendClass {
    Positive,
    Negative,
    None,
}

impl TrendClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrendClass::Positive => "positive",
            TrendClass::Negative => "negative",
            TrendClass::None => "none",
        }
    }

    /// Significant slope in the given direction at level `alpha`.
    pub fn of<T: Scalar>(slope: T, p_value: T, alpha: T) -> Self {
        if p_value < alpha && slope > T::zero() {
            TrendClass::Positive
        } else if p_value < alpha && slope < T::zero() {
            TrendClass::Negative
        } else {
            TrendClass::None
        }
    }

    /// Numeric code stored in tables: 1, −1 or 0.
    pub fn code(self) -> f64 {
        match self {
            TrendClass::Positive => 1.0,
            TrendClass::Negative => -1.0,
            TrendClass::None => 0.0,
        }
    }
}

pub fn class_of_code(code: f64) -> TrendClass {
    if code > 0.0 {
        TrendClass::Positive
    } else if code < 0.0 {
        TrendClass::Negative
    } else {
        TrendClass::None
    }
}

// Column names under which trend results of a measure are joined to the
// neighborhood table.
pub fn class_column(measure: &str) -> String {
    format!("{measure}_trend_class")
}
pub fn slope_column(measure: &str) -> String {
    format!("{measure}_trend_slope")
}
pub fn positive_column(measure: &str) -> String {
    format!("{measure}_trend_pos")
}
pub fn negative_column(measure: &str) -> String {
    format!("{measure}_trend_neg")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrendError {
    #[error("need at least 3 distinct years, got {0}")]
    TooFewYears(usize),
}

/// Slope of a series on year.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_se: T,
    pub t_stat: T,
    pub p_value: T,
    pub n_years: usize,
}

impl<T: Scalar> Trend<T> {
    pub fn classify(&self, alpha: T) -> TrendClass {
        TrendClass::of(self.slope, self.p_value, alpha)
    }
}

/// OLS of value on centered year. `intercept` is the fitted value at the
/// mean year. Non-finite values are skipped.
pub fn fit_yearly_trend<T: Scalar>(series: &BTreeMap<i32, T>) -> Result<Trend<T>, TrendError> {
    let pts: Vec<(T, T)> = series
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(&y, &v)| (T::of(y as f64), v))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(TrendError::TooFewYears(n));
    }
    let nt = T::of_usize(n);
    let xbar = pts.iter().map(|p| p.0).sum::<T>() / nt;
    let ybar = pts.iter().map(|p| p.1).sum::<T>() / nt;
    let sxx: T = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let rss: T = pts
        .iter()
        .map(|p| {
            let r = p.1 - ybar - slope * (p.0 - xbar);
            r * r
        })
        .sum();
    let df = n - 2;
    // Residuals at rounding level count as a perfect line.
    let scale = pts.iter().fold(T::zero(), |m, p| m.max((p.1 - ybar).abs()));
    let tiny = T::epsilon() * T::of(64.0) * scale * scale * nt;
    let (slope_se, t_stat, p_value) = if rss <= tiny {
        if slope.abs() > T::epsilon() * T::of(64.0) * scale {
            (T::zero(), slope.signum() * T::infinity(), T::zero())
        } else {
            (T::zero(), T::zero(), T::one())
        }
    } else {
        let se = (rss / T::of_usize(df) / sxx).sqrt();
        let t = slope / se;
        (se, t, T::of(t_two_sided_p(t.as_f64(), df as f64)))
    };
    Ok(Trend { slope, intercept: ybar, slope_se, t_stat, p_value, n_years: n })
}

/// One classified series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub blockgroup_id: String,
    pub measure: String,
    pub slope: f64,
    pub slope_se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub classification: TrendClass,
    pub n_years: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub positive: usize,
    pub negative: usize,
    pub none: usize,
    /// Units with fewer than 3 defined years.
    pub unclassified: usize,
}

/// Fits and classifies every series of one measure. Series with fewer than
/// three defined years are counted as unclassified and omitted.
pub fn classify_all(
    measure: &str,
    series: &BTreeMap<String, BTreeMap<i32, f64>>,
    alpha: f64,
) -> (Vec<TrendResult>, TrendSummary) {
    let mut out = Vec::with_capacity(series.len());
    let mut summary = TrendSummary::default();
    for (id, s) in series {
        match fit_yearly_trend(s) {
            Ok(t) => {
                let class = t.classify(alpha);
                match class {
                    TrendClass::Positive => summary.positive += 1,
                    TrendClass::Negative => summary.negative += 1,
                    TrendClass::None => summary.none += 1,
                }
                out.push(TrendResult {
                    blockgroup_id: id.clone(),
                    measure: measure.to_string(),
                    slope: t.slope,
                    slope_se: t.slope_se,
                    t_stat: t.t_stat,
                    p_value: t.p_value,
                    classification: class,
                    n_years: t.n_years,
                });
            }
            Err(TrendError::TooFewYears(_)) => summary.unclassified += 1,
        }
    }
    (out, summary)
}
