//! The fixed set of regression models and matched experiments.

use crate::glm::{standard_covariates, Family, ModelSpec, Term};
use crate::measures::{crime_column, log_crime_column, CrimeCategory, CRIME_TOTAL, PERMITS, SPONTANEOUS};
use crate::psm::{OutcomeSpec, TreatmentRule};
use crate::trends::{negative_column, positive_column, slope_column, TrendClass};

/// Vibrancy measures with the short labels used in model names.
pub const VIBRANCY: [(&str, &str); 2] = [(PERMITS, "permits"), (SPONTANEOUS, "spontaneous")];

/// Measures whose yearly series get a trend classification.
pub const TREND_MEASURES: [&str; 3] = [PERMITS, SPONTANEOUS, CRIME_TOTAL];

const CRIME_OUTCOMES: [Option<CrimeCategory>; 4] =
    [None, Some(CrimeCategory::Violent), Some(CrimeCategory::NonViolent), Some(CrimeCategory::Vice)];

fn with_covariates(mut lead: Vec<Term>) -> Vec<Term> {
    lead.extend(standard_covariates());
    lead
}

fn trend_indicators(measure: &str, label: &str) -> Vec<Term> {
    vec![
        Term::new(&positive_column(measure), crate::glm::Transform::Identity, &format!("{label}_trend_pos")),
        Term::new(&negative_column(measure), crate::glm::Transform::Identity, &format!("{label}_trend_neg")),
    ]
}

/// Log-linear and negative binomial crime models for each vibrancy measure
/// and crime outcome, then logistic models of trend indicators.
pub fn regression_models() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for (measure, label) in VIBRANCY {
        for cat in CRIME_OUTCOMES {
            let crime = crime_column(cat);
            out.push(ModelSpec {
                name: format!("ols_log_{crime}_{label}"),
                family: Family::Ols,
                outcome: Term::identity(&log_crime_column(cat)),
                predictors: with_covariates(vec![Term::identity(measure)]),
            });
            out.push(ModelSpec {
                name: format!("negbin_{crime}_{label}"),
                family: Family::NegativeBinomial,
                outcome: Term::identity(&crime),
                predictors: with_covariates(vec![Term::identity(measure)]),
            });
        }
    }
    for (measure, label) in VIBRANCY {
        for (col, suffix) in [(positive_column(measure), "pos"), (negative_column(measure), "neg")] {
            out.push(ModelSpec {
                name: format!("logit_{label}_trend_{suffix}"),
                family: Family::Logistic,
                outcome: Term::identity(&col),
                predictors: with_covariates(trend_indicators(CRIME_TOTAL, "crime")),
            });
        }
        for (col, suffix) in [(positive_column(CRIME_TOTAL), "pos"), (negative_column(CRIME_TOTAL), "neg")] {
            out.push(ModelSpec {
                name: format!("logit_crime_trend_{suffix}_{label}"),
                family: Family::Logistic,
                outcome: Term::identity(&col),
                predictors: with_covariates(trend_indicators(measure, label)),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub rule: TreatmentRule,
    pub outcome: OutcomeSpec,
}

/// Two median-split experiments on whole-window measures, then every
/// combination of a significant vibrancy trend with a crime-trend outcome.
pub fn experiments() -> Vec<Experiment> {
    let log_crime = log_crime_column(None);
    let mut out: Vec<Experiment> = VIBRANCY
        .iter()
        .map(|(measure, label)| Experiment {
            name: format!("{label}_above_median__{log_crime}"),
            rule: TreatmentRule::AboveMedian { column: measure.to_string() },
            outcome: OutcomeSpec::continuous(&log_crime, &log_crime),
        })
        .collect();
    let outcomes = [
        OutcomeSpec::continuous("crime_slope", &slope_column(CRIME_TOTAL)),
        OutcomeSpec::binary("crime_pos", &positive_column(CRIME_TOTAL)),
        OutcomeSpec::binary("crime_neg", &negative_column(CRIME_TOTAL)),
    ];
    for (measure, label) in VIBRANCY {
        for (direction, d) in [(TrendClass::Positive, "pos"), (TrendClass::Negative, "neg")] {
            for outcome in &outcomes {
                out.push(Experiment {
                    name: format!("{label}_{d}__{}", outcome.name),
                    rule: TreatmentRule::SignificantTrend { measure: measure.to_string(), direction },
                    outcome: outcome.clone(),
                });
            }
        }
    }
    out
}

/// Keeps the named entries (all when `wanted` is empty); unknown names are
/// returned as the error.
pub fn select<T>(all: Vec<T>, wanted: &[String], name: impl Fn(&T) -> &str) -> Result<Vec<T>, String> {
    if wanted.is_empty() {
        return Ok(all);
    }
    if let Some(w) = wanted.iter().find(|w| !all.iter().any(|t| name(t) == w.as_str())) {
        let known: Vec<&str> = all.iter().map(&name).collect();
        return Err(format!("unknown name `{w}`; available: {}", known.join(", ")));
    }
    Ok(all.into_iter().filter(|t| wanted.iter().any(|w| w == name(t))).collect())
}
