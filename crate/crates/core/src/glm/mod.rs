//! Regression families used by the analysis: OLS on log outcomes,
//! NB2 negative-binomial counts, and logistic regression.
//!
//! All three return a [`FitResult`] with a common reporting surface
//! (estimates, standard errors, test statistics, p-values, covariance and
//! fit statistics).

mod design;
mod irls;
pub mod logistic;
pub mod negbin;
mod ols;
mod report;

pub use design::{build_design, standard_covariates, Design, DroppedRow, ModelSpec, Term, Transform};
pub use logistic::fit_logistic;
pub use negbin::{fit_negbin, fit_poisson, NegBinOptions};
pub use ols::fit_ols;
pub use report::{significance_stars, RegressionRow};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Name given to the column of ones in every design.
pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ols,
    NegativeBinomial,
    Logistic,
    /// Limit of the negative binomial as θ → ∞.
    Poisson,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ols => "ols",
            Family::NegativeBinomial => "negbin",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("column `{0}` not found in table")]
    MissingColumn(String),
    #[error("column `{0}` has zero variance after filtering")]
    ZeroVariance(String),
    #[error("predictor `{0}` listed twice")]
    DuplicatePredictor(String),
    #[error("outcome column `{0}` also appears among the predictors")]
    OutcomeAmongPredictors(String),
    #[error("need more observations than parameters (n = {n}, p = {p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("design is rank deficient; linearly dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("invalid outcome: {0}")]
    InvalidOutcome(String),
    #[error("outcome has no variation")]
    NoOutcomeVariation,
    #[error("perfect or quasi-perfect separation detected after {iterations} iterations")]
    Separation { iterations: usize, last_iterate: Vec<f64> },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize, last_iterate: Vec<f64> },
    #[error("design has {found} columns, fit expects {expected}")]
    ColumnMismatch { expected: usize, found: usize },
}

/// Estimates and fit statistics of one regression.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub family: Family,
    pub names: Vec<String>,
    pub coefficients: Vec<T>,
    pub std_errors: Vec<T>,
    /// t statistics for OLS, z statistics otherwise.
    pub statistics: Vec<T>,
    pub p_values: Vec<T>,
    pub vcov: Matrix<T>,
    pub n_obs: usize,
    pub r_squared: Option<T>,
    pub adj_r_squared: Option<T>,
    pub log_likelihood: Option<T>,
    pub aic: Option<T>,
    /// Root mean squared error on the log scale (see each fitter).
    pub rmse: Option<T>,
    /// NB2 dispersion; variance = μ + μ²/θ.
    pub theta: Option<T>,
    pub theta_at_boundary: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.position(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<T> {
        self.position(name).map(|i| self.std_errors[i])
    }

    pub fn p_value(&self, name: &str) -> Option<T> {
        self.position(name).map(|i| self.p_values[i])
    }

    /// Replaces the default `x1..xp` names.
    ///
    /// # Panics
    /// If the number of names differs from the number of coefficients.
    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.coefficients.len(), "one name per coefficient");
        self.names = names;
        self
    }

    /// Linear predictor `Xβ`.
    pub fn linear_predictor(&self, x: &Matrix<T>) -> Result<Vec<T>, GlmError> {
        if x.cols() != self.coefficients.len() {
            return Err(GlmError::ColumnMismatch { expected: self.coefficients.len(), found: x.cols() });
        }
        Ok(x.mul_vec(&self.coefficients))
    }
}

/// Predictions on the response scale: `Xβ` for OLS, the inverse logit for
/// logistic fits and `exp(Xβ)` for negative-binomial fits.
pub fn predict<T: Scalar>(fit: &FitResult<T>, x: &Matrix<T>) -> Result<Vec<T>, GlmError> {
    let eta = fit.linear_predictor(x)?;
    Ok(match fit.family {
        Family::Ols => eta,
        Family::Logistic => eta.into_iter().map(logistic::inv_logit).collect(),
        Family::NegativeBinomial | Family::Poisson => eta.into_iter().map(T::exp).collect(),
    })
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Standard errors from the covariance diagonal and Wald statistics with
/// the given p-value function.
pub(crate) fn wald<T: Scalar>(
    coefficients: &[T],
    vcov: &Matrix<T>,
    p_of: impl Fn(f64) -> f64,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let se: Vec<T> = vcov.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
    let mut stats = Vec::with_capacity(se.len());
    let mut ps = Vec::with_capacity(se.len());
    for (&b, &s) in coefficients.iter().zip(&se) {
        let (stat, p) = if s > T::zero() {
            let st = b / s;
            (st, T::of(p_of(st.as_f64())))
        } else if b == T::zero() {
            (T::zero(), T::one())
        } else {
            (b.signum() * T::infinity(), T::zero())
        };
        stats.push(stat);
        ps.push(p);
    }
    (se, stats, ps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_with(family: Family, coefficients: Vec<f64>) -> FitResult<f64> {
        let p = coefficients.len();
        FitResult {
            family,
            names: default_names(p),
            coefficients,
            std_errors: vec![0.0; p],
            statistics: vec![0.0; p],
            p_values: vec![1.0; p],
            vcov: Matrix::zeros(p, p),
            n_obs: 0,
            r_squared: None,
            adj_r_squared: None,
            log_likelihood: None,
            aic: None,
            rmse: None,
            theta: None,
            theta_at_boundary: false,
            converged: true,
            iterations: 0,
        }
    }

    #[test]
    fn predict_per_family() {
        let ols = fit_with(Family::Ols, vec![1.0, 2.0]);
        let x = Matrix::from_rows(&[vec![1.0, 3.0]]);
        assert_eq!(predict(&ols, &x).unwrap(), vec![7.0]);

        let logit = fit_with(Family::Logistic, vec![0.0]);
        let x1 = Matrix::from_rows(&[vec![1.0]]);
        assert_eq!(predict(&logit, &x1).unwrap(), vec![0.5]);

        let nb = fit_with(Family::NegativeBinomial, vec![4f64.ln()]);
        assert!((predict(&nb, &x1).unwrap()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn predict_rejects_column_mismatch() {
        let ols = fit_with(Family::Ols, vec![1.0, 2.0]);
        let x = Matrix::from_rows(&[vec![1.0]]);
        assert_eq!(predict(&ols, &x), Err(GlmError::ColumnMismatch { expected: 2, found: 1 }));
    }
}
