use serde::Serialize;

use super::FitResult;
use crate::scalar::Scalar;

/// Conventional markers: `+` p < 0.1, `*` < 0.05, `**` < 0.01, `***` < 0.001.
pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => "+",
        _ => "",
    }
}

/// One line of the machine-readable regression report: a term estimate, or
/// a model summary when `term` is `"(model)"`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RegressionRow {
    pub model: String,
    pub family: String,
    pub status: String,
    pub term: String,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    pub n_obs: Option<usize>,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    pub rmse: Option<f64>,
    pub theta: Option<f64>,
    pub theta_at_boundary: Option<bool>,
    pub outcome_positives: Option<usize>,
}

impl RegressionRow {
    fn blank(model: &str, family: &str, status: &str, term: &str) -> Self {
        Self {
            model: model.to_string(),
            family: family.to_string(),
            status: status.to_string(),
            term: term.to_string(),
            estimate: None,
            std_error: None,
            statistic: None,
            p_value: None,
            stars: String::new(),
            n_obs: None,
            r_squared: None,
            adj_r_squared: None,
            log_likelihood: None,
            aic: None,
            rmse: None,
            theta: None,
            theta_at_boundary: None,
            outcome_positives: None,
        }
    }

    /// Term rows followed by the model summary row.
    pub fn from_fit<T: Scalar>(model: &str, fit: &FitResult<T>, outcome_positives: Option<usize>) -> Vec<Self> {
        let family = fit.family.as_str();
        let mut rows: Vec<Self> = (0..fit.n_params())
            .map(|i| {
                let p = fit.p_values[i].as_f64();
                Self {
                    estimate: Some(fit.coefficients[i].as_f64()),
                    std_error: Some(fit.std_errors[i].as_f64()),
                    statistic: Some(fit.statistics[i].as_f64()),
                    p_value: Some(p),
                    stars: significance_stars(p).to_string(),
                    ..Self::blank(model, family, "ok", &fit.names[i])
                }
            })
            .collect();
        rows.push(Self {
            n_obs: Some(fit.n_obs),
            r_squared: fit.r_squared.map(Scalar::as_f64),
            adj_r_squared: fit.adj_r_squared.map(Scalar::as_f64),
            log_likelihood: fit.log_likelihood.map(Scalar::as_f64),
            aic: fit.aic.map(Scalar::as_f64),
            rmse: fit.rmse.map(Scalar::as_f64),
            theta: fit.theta.map(Scalar::as_f64),
            theta_at_boundary: fit.theta.map(|_| fit.theta_at_boundary),
            outcome_positives,
            ..Self::blank(model, family, "ok", "(model)")
        });
        rows
    }

    /// Summary row for a model that could not be fitted.
    pub fn failed(model: &str, family: &str, status: &str) -> Self {
        Self::blank(model, family, status, "(model)")
    }
}
