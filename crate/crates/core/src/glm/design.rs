use std::collections::HashSet;

use super::{Family, GlmError, INTERCEPT};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// Natural log; non-positive inputs are undefined.
    Log,
    Scale(f64),
}

impl Transform {
    pub fn apply(self, v: f64) -> Option<f64> {
        let out = match self {
            Transform::Identity => v,
            Transform::Log if v > 0.0 => v.ln(),
            Transform::Log => return None,
            Transform::Scale(c) => v * c,
        };
        out.is_finite().then_some(out)
    }
}

/// A table column with a transform and the label it gets in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub column: String,
    pub transform: Transform,
    pub label: String,
}

impl Term {
    pub fn new(column: &str, transform: Transform, label: &str) -> Self {
        Self { column: column.to_string(), transform, label: label.to_string() }
    }

    pub fn identity(column: &str) -> Self {
        Self::new(column, Transform::Identity, column)
    }
}

/// Neighborhood covariates entering every model, in report order.
///
/// White and "other" race shares are the omitted reference; Asian share is
/// not part of the frozen predictor list.
pub fn standard_covariates() -> Vec<Term> {
    vec![
        Term::new("mean_income", Transform::Log, "log_income"),
        Term::new("poverty_index", Transform::Identity, "poverty"),
        Term::new("population", Transform::Log, "log_population"),
        Term::new("prop_black", Transform::Identity, "black"),
        Term::new("prop_hispanic", Transform::Identity, "hispanic"),
        Term::new("total_area", Transform::Scale(1e-6), "area_1e6"),
        Term::new("prop_commercial", Transform::Identity, "commercial"),
        Term::new("prop_residential", Transform::Identity, "residential"),
        Term::new("prop_vacant", Transform::Identity, "vacant"),
        Term::new("prop_transportation", Transform::Identity, "transportation"),
        Term::new("prop_industrial", Transform::Identity, "industrial"),
        Term::new("prop_park", Transform::Identity, "park"),
        Term::new("prop_civic", Transform::Identity, "civic"),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub family: Family,
    pub outcome: Term,
    /// Vibrancy measure first, then covariates. The intercept is implicit.
    pub predictors: Vec<Term>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), GlmError> {
        let mut seen = HashSet::new();
        for t in &self.predictors {
            if !seen.insert(t.label.as_str()) {
                return Err(GlmError::DuplicatePredictor(t.label.clone()));
            }
            if t.column == self.outcome.column {
                return Err(GlmError::OutcomeAmongPredictors(t.column.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    pub id: String,
    pub reason: String,
}

/// Model matrix with the intercept as its last column.
#[derive(Debug, Clone)]
pub struct Design<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
    pub names: Vec<String>,
    pub row_ids: Vec<String>,
    pub dropped: Vec<DroppedRow>,
}

/// Assembles `(X, y)` for a model, dropping rows whose outcome or any
/// predictor is undefined after transformation.
pub fn build_design<T: Scalar>(table: &Table, spec: &ModelSpec) -> Result<Design<T>, GlmError> {
    spec.validate()?;
    let outcome = table
        .column(&spec.outcome.column)
        .ok_or_else(|| GlmError::MissingColumn(spec.outcome.column.clone()))?;
    let predictors = spec
        .predictors
        .iter()
        .map(|t| table.column(&t.column).ok_or_else(|| GlmError::MissingColumn(t.column.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut row_ids = Vec::new();
    let mut dropped = Vec::new();
    'rows: for (i, id) in table.ids().iter().enumerate() {
        let Some(yv) = outcome[i].and_then(|v| spec.outcome.transform.apply(v)) else {
            dropped.push(DroppedRow { id: id.clone(), reason: format!("undefined outcome {}", spec.outcome.label) });
            continue;
        };
        let mut row = Vec::with_capacity(predictors.len() + 1);
        for (term, col) in spec.predictors.iter().zip(&predictors) {
            match col[i].and_then(|v| term.transform.apply(v)) {
                Some(v) => row.push(v),
                None => {
                    dropped.push(DroppedRow { id: id.clone(), reason: format!("undefined predictor {}", term.label) });
                    continue 'rows;
                }
            }
        }
        row.push(1.0);
        rows.push(row);
        y.push(yv);
        row_ids.push(id.clone());
    }

    for (j, term) in spec.predictors.iter().enumerate() {
        let mut values = rows.iter().map(|r| r[j]);
        if let Some(first) = values.next() {
            if values.all(|v| v == first) {
                return Err(GlmError::ZeroVariance(term.label.clone()));
            }
        }
    }

    let mut names: Vec<String> = spec.predictors.iter().map(|t| t.label.clone()).collect();
    names.push(INTERCEPT.to_string());
    let x = Matrix::from_fn(rows.len(), names.len(), |i, j| T::of(rows[i][j]));
    Ok(Design { x, y: y.into_iter().map(T::of).collect(), names, row_ids, dropped })
}
