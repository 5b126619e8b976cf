//! Covariate balance before and after matching.

use serde::Serialize;

use super::matching::Pair;
use crate::linalg::Matrix;
use crate::scalar::{mean, sample_variance, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub smd_before: Option<f64>,
    pub smd_after: Option<f64>,
}

fn split<T: Scalar>(col: &[T], treated: &[bool]) -> (Vec<T>, Vec<T>) {
    let t = col.iter().zip(treated).filter(|(_, &l)| l).map(|(&v, _)| v).collect();
    let c = col.iter().zip(treated).filter(|(_, &l)| !l).map(|(&v, _)| v).collect();
    (t, c)
}

/// Pre-matching pooled SD `√((s²_T + s²_C)/2)`; `None` if not positive.
fn pooled_sd<T: Scalar>(col: &[T], treated: &[bool]) -> Option<T> {
    let (t, c) = split(col, treated);
    let v = (sample_variance(&t) + sample_variance(&c)) / T::of(2.0);
    (v > T::zero() && v.is_finite()).then(|| v.sqrt())
}

/// Standardized mean differences `(mean_T − mean_C) / pooled SD` for every
/// column of `x`. Without pairs the means are over all units; with pairs
/// they are over matched units, each control counted once per pair it
/// appears in. The denominator is always the pre-matching pooled SD.
/// Columns with zero pooled variance give `None`.
pub fn standardized_differences<T: Scalar>(x: &Matrix<T>, treated: &[bool], pairs: Option<&[Pair<T>]>) -> Vec<Option<T>> {
    assert_eq!(x.rows(), treated.len(), "one label per row");
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let sd = pooled_sd(&col, treated)?;
            let diff = match pairs {
                None => {
                    let (t, c) = split(&col, treated);
                    mean(&t) - mean(&c)
                }
                Some(p) => {
                    let t: Vec<T> = p.iter().map(|q| col[q.treated]).collect();
                    let c: Vec<T> = p.iter().map(|q| col[q.control]).collect();
                    mean(&t) - mean(&c)
                }
            };
            diff.is_finite().then(|| diff / sd)
        })
        .collect()
}

/// Before/after balance table for the named columns.
pub fn balance_table<T: Scalar>(x: &Matrix<T>, names: &[String], treated: &[bool], pairs: &[Pair<T>]) -> Vec<BalanceRow> {
    let before = standardized_differences(x, treated, None);
    let after = standardized_differences(x, treated, Some(pairs));
    names
        .iter()
        .zip(before.into_iter().zip(after))
        .map(|(n, (b, a))| BalanceRow {
            covariate: n.clone(),
            smd_before: b.map(Scalar::as_f64),
            smd_after: a.map(Scalar::as_f64),
        })
        .collect()
}

/// Mean of `|SMD|` over defined entries.
pub fn mean_abs_smd(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().map(|s| s.abs()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
