//! Propensity-score matching experiments.
//!
//! A treatment rule splits neighborhoods into treated and control groups;
//! a logistic model of treatment on the neighborhood covariates gives the
//! propensity scores; treated units are greedily paired with controls of
//! similar score and the outcome is compared within pairs.

mod balance;
mod inference;
mod matching;

pub use balance::{balance_table, mean_abs_smd, standardized_differences, BalanceRow};
pub use inference::{matched_odds_ratio, paired_inference, wilcoxon_signed_rank, MatchedOddsRatio, PairedInference, WILCOXON_EXACT_MAX};
pub use matching::{match_pairs, processing_order, MatchMode, Matching, Pair};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{build_design, fit_logistic, logistic::inv_logit, Family, FitResult, GlmError, ModelSpec, Term, INTERCEPT};
use crate::linalg::Matrix;
use crate::scalar::{mean, median, sample_variance, Scalar};
use crate::table::Table;
use crate::trends::{self, TrendClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsmError {
    #[error("treatment rule gives no contrast: {0}")]
    NoContrast(String),
    #[error("need at least 2 matched pairs, got {0}")]
    TooFewPairs(usize),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("outcome for `{0}` must be 0 or 1")]
    NonBinaryOutcome(String),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

pub type Labels = BTreeMap<String, bool>;

/// Treated iff the value is strictly above the median of all values.
pub fn above_median(values: &BTreeMap<String, f64>) -> Result<Labels, PsmError> {
    let v: Vec<f64> = values.values().copied().collect();
    let med = median(&v);
    let labels: Labels = values.iter().map(|(k, &x)| (k.clone(), x > med)).collect();
    if labels.values().all(|&l| !l) {
        return Err(PsmError::NoContrast(format!("no value above the median {med}")));
    }
    Ok(labels)
}

/// Treated iff the trend classification equals `direction`.
pub fn trend_treatment(classes: &BTreeMap<String, TrendClass>, direction: TrendClass) -> Result<Labels, PsmError> {
    let labels: Labels = classes.iter().map(|(k, &c)| (k.clone(), c == direction)).collect();
    let n_treated = labels.values().filter(|&&l| l).count();
    if n_treated == 0 || n_treated == labels.len() {
        return Err(PsmError::NoContrast(format!("{n_treated} of {} units have a {} trend", labels.len(), direction.as_str())));
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TreatmentRule {
    /// Treated iff the column value exceeds its median.
    AboveMedian { column: String },
    /// Treated iff the measure's trend is significant in `direction`.
    SignificantTrend { measure: String, direction: TrendClass },
    /// Treated iff the column value is nonzero.
    Indicator { column: String },
}

impl TreatmentRule {
    pub fn label(&self) -> String {
        match self {
            TreatmentRule::AboveMedian { column } => format!("{column}_above_median"),
            TreatmentRule::SignificantTrend { measure, direction } => format!("{measure}_trend_{}", direction.as_str()),
            TreatmentRule::Indicator { column } => column.clone(),
        }
    }

    /// Labels for every unit with a defined value.
    pub fn labels(&self, table: &Table) -> Result<Labels, PsmError> {
        match self {
            TreatmentRule::AboveMedian { column } => {
                let values = table.column_map(column).ok_or_else(|| PsmError::MissingColumn(column.clone()))?;
                above_median(&values)
            }
            TreatmentRule::SignificantTrend { measure, direction } => {
                let col = trends::class_column(measure);
                let codes = table.column_map(&col).ok_or(PsmError::MissingColumn(col))?;
                let classes = codes.into_iter().map(|(k, c)| (k, trends::class_of_code(c))).collect();
                trend_treatment(&classes, *direction)
            }
            TreatmentRule::Indicator { column } => {
                let values = table.column_map(column).ok_or_else(|| PsmError::MissingColumn(column.clone()))?;
                Ok(values.into_iter().map(|(k, v)| (k, v != 0.0)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    /// 0/1 outcome; adds the discordant-pair odds ratio.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSpec {
    pub name: String,
    pub column: String,
    pub kind: OutcomeKind,
}

impl OutcomeSpec {
    pub fn continuous(name: &str, column: &str) -> Self {
        Self { name: name.into(), column: column.into(), kind: OutcomeKind::Continuous }
    }

    pub fn binary(name: &str, column: &str) -> Self {
        Self { name: name.into(), column: column.into(), kind: OutcomeKind::Binary }
    }
}

/// Scale on which propensity distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchScale {
    #[default]
    Logit,
    Probability,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MatchOptions {
    /// `None` selects [`MatchMode::auto`].
    pub mode: Option<MatchMode>,
    pub scale: MatchScale,
    /// Maximum distance in standard deviations of the matching score.
    pub caliper_sd: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Propensity<T> {
    pub probability: Vec<T>,
    pub logit: Vec<T>,
    pub fit: FitResult<T>,
}

/// Logistic model of treatment on the columns of `x` (which must include
/// any intercept). Scores are the fitted probabilities.
pub fn estimate_propensity<T: Scalar>(x: &Matrix<T>, treated: &[bool]) -> Result<Propensity<T>, GlmError> {
    let y: Vec<T> = treated.iter().map(|&t| if t { T::one() } else { T::zero() }).collect();
    let fit = fit_logistic(x, &y)?;
    let logit = fit.linear_predictor(x)?;
    let probability = logit.iter().map(|&e| inv_logit(e)).collect();
    Ok(Propensity { probability, logit, fit })
}

/// Result of one matched comparison.
#[derive(Debug, Clone)]
pub struct MatchedExperiment<T> {
    pub ids: Vec<String>,
    pub treated: Vec<bool>,
    pub propensity: Propensity<T>,
    pub matching: Matching<T>,
    pub balance: Vec<BalanceRow>,
    pub inference: PairedInference<T>,
    /// Binary outcomes only.
    pub odds_ratio: Option<MatchedOddsRatio>,
    /// Unadjusted treated-minus-control difference in mean outcome.
    pub naive_diff: T,
}

impl<T: Scalar> MatchedExperiment<T> {
    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.treated.len() - self.n_treated()
    }
}

/// Propensity estimation, matching, balance and paired inference on
/// aligned arrays. `x` holds the propensity covariates (with intercept) and
/// `names` their labels; balance is reported for every non-intercept
/// column.
pub fn match_and_infer<T: Scalar>(
    ids: &[String],
    x: &Matrix<T>,
    names: &[String],
    treated: &[bool],
    outcome: &[T],
    kind: OutcomeKind,
    opts: &MatchOptions,
) -> Result<MatchedExperiment<T>, PsmError> {
    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == treated.len() {
        return Err(PsmError::NoContrast(format!("{n_treated} treated of {}", treated.len())));
    }
    if kind == OutcomeKind::Binary {
        if let Some(i) = outcome.iter().position(|&v| v != T::zero() && v != T::one()) {
            return Err(PsmError::NonBinaryOutcome(ids[i].clone()));
        }
    }
    let propensity = estimate_propensity(x, treated)?;
    let score = match opts.scale {
        MatchScale::Logit => &propensity.logit,
        MatchScale::Probability => &propensity.probability,
    };
    let caliper = opts.caliper_sd.map(|c| T::of(c) * sample_variance(score).sqrt());
    let mode = opts.mode.unwrap_or_else(|| MatchMode::auto(n_treated, treated.len() - n_treated));
    let matching = match_pairs(ids, score, treated, mode, caliper);

    let keep: Vec<usize> = (0..names.len()).filter(|&j| names[j] != INTERCEPT).collect();
    let balance = balance_table(&x.select_columns(&keep), &keep.iter().map(|&j| names[j].clone()).collect::<Vec<_>>(), treated, &matching.pairs);

    let diffs: Vec<T> = matching.pairs.iter().map(|p| outcome[p.treated] - outcome[p.control]).collect();
    let inference = paired_inference(&diffs)?;
    let odds_ratio = (kind == OutcomeKind::Binary).then(|| {
        let o: Vec<(bool, bool)> =
            matching.pairs.iter().map(|p| (outcome[p.treated] == T::one(), outcome[p.control] == T::one())).collect();
        matched_odds_ratio(&o)
    });
    let (yt, yc): (Vec<T>, Vec<T>) = {
        let t = outcome.iter().zip(treated).filter(|(_, &l)| l).map(|(&v, _)| v).collect();
        let c = outcome.iter().zip(treated).filter(|(_, &l)| !l).map(|(&v, _)| v).collect();
        (t, c)
    };
    Ok(MatchedExperiment {
        ids: ids.to_vec(),
        treated: treated.to_vec(),
        propensity,
        matching,
        balance,
        inference,
        odds_ratio,
        naive_diff: mean(&yt) - mean(&yc),
    })
}

const TREATED_COLUMN: &str = "__treated";

/// Table-level experiment: units need a treatment label, a defined outcome
/// and defined covariates.
pub fn run_experiment(
    table: &Table,
    rule: &TreatmentRule,
    outcome: &OutcomeSpec,
    covariates: &[Term],
    opts: &MatchOptions,
) -> Result<MatchedExperiment<f64>, PsmError> {
    let labels = rule.labels(table)?;
    let y = table.column(&outcome.column).ok_or_else(|| PsmError::MissingColumn(outcome.column.clone()))?;
    let ids: Vec<String> = table
        .ids()
        .iter()
        .zip(y)
        .filter(|(id, v)| v.is_some() && labels.contains_key(*id))
        .map(|(id, _)| id.clone())
        .collect();

    let mut sub = Table::new(ids.clone());
    sub.insert(TREATED_COLUMN, ids.iter().map(|id| Some(if labels[id] { 1.0 } else { 0.0 })).collect());
    for term in covariates {
        let col = table.column(&term.column).ok_or_else(|| PsmError::MissingColumn(term.column.clone()))?;
        sub.insert(term.column.clone(), ids.iter().map(|id| col[table.row_of(id).expect("id from table")]).collect());
    }
    let spec = ModelSpec {
        name: rule.label(),
        family: Family::Logistic,
        outcome: Term::identity(TREATED_COLUMN),
        predictors: covariates.to_vec(),
    };
    let design = build_design::<f64>(&sub, &spec)?;
    let treated: Vec<bool> = design.y.iter().map(|&v| v == 1.0).collect();
    let out: Vec<f64> = design.row_ids.iter().map(|id| table.get(id, &outcome.column).expect("outcome defined")).collect();
    match_and_infer(&design.row_ids, &design.x, &design.names, &treated, &out, outcome.kind, opts)
}
