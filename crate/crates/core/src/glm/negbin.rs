//! NB2 negative-binomial regression with a log link.
//!
//! Variance is `μ + μ²/θ`. Coefficients and dispersion are estimated by
//! alternating IRLS for `β` at fixed `θ` with a safeguarded Newton search
//! for the `θ` maximizing the likelihood at fixed `μ`, until both scores
//! vanish. When the likelihood keeps increasing up to `θ_max` the data are
//! not overdispersed; the fit is then reported at `θ_max` with
//! `theta_at_boundary` set, which is numerically the Poisson fit.

use statrs::function::gamma::{digamma, ln_gamma};

use super::irls::{irls, score as irls_score, IrlsFailure, IrlsFit, IrlsOptions, Likelihood, Start};
use super::{default_names, wald, Family, FitResult, GlmError};
use crate::dist::{normal_two_sided_p, trigamma};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Counts up to this size use exact finite sums for the gamma-ratio terms.
const EXACT_SUM_LIMIT: f64 = 100_000.0;

#[derive(Debug, Clone, Copy)]
pub struct NegBinOptions {
    pub max_outer: usize,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for NegBinOptions {
    fn default() -> Self {
        Self { max_outer: 100, theta_min: 1e-8, theta_max: 1e6 }
    }
}

struct NegBin<T> {
    theta: T,
}

impl<T: Scalar> Likelihood<T> for NegBin<T> {
    fn mean(&self, eta: T) -> T {
        eta.exp()
    }
    fn link(&self, mu: T) -> T {
        mu.ln()
    }
    // Drops `y ln θ`, so large θ approaches the Poisson form without
    // cancellation.
    fn log_lik(&self, y: T, eta: T) -> T {
        let th = self.theta;
        y * eta - (y + th) * (eta.exp() / th).ln_1p()
    }
    fn d_eta(&self, y: T, eta: T) -> T {
        let mu = eta.exp();
        self.theta * (y - mu) / (self.theta + mu)
    }
    fn weight(&self, eta: T) -> T {
        let mu = eta.exp();
        self.theta * mu / (self.theta + mu)
    }
    fn d_eta_d_mu(&self, mu: T) -> T {
        T::one() / mu
    }
}

struct Poisson;

impl<T: Scalar> Likelihood<T> for Poisson {
    fn mean(&self, eta: T) -> T {
        eta.exp()
    }
    fn link(&self, mu: T) -> T {
        mu.ln()
    }
    fn log_lik(&self, y: T, eta: T) -> T {
        y * eta - eta.exp()
    }
    fn d_eta(&self, y: T, eta: T) -> T {
        y - eta.exp()
    }
    fn weight(&self, eta: T) -> T {
        eta.exp()
    }
    fn d_eta_d_mu(&self, mu: T) -> T {
        T::one() / mu
    }
}

/// `ln Γ(y + θ) − ln Γ(θ)`.
fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        (0..y as u64).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// `ψ(y + θ) − ψ(θ)`.
fn digamma_diff(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        (0..y as u64).map(|k| 1.0 / (theta + k as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

/// `ψ'(θ) − ψ'(y + θ)`.
fn trigamma_diff(y: f64, theta: f64) -> f64 {
    if y <= EXACT_SUM_LIMIT {
        (0..y as u64).map(|k| (theta + k as f64).powi(-2)).sum()
    } else {
        trigamma(theta) - trigamma(y + theta)
    }
}

/// `∂ℓ/∂θ` at fixed means.
fn theta_score(y: &[f64], mu: &[f64], theta: f64) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &m)| digamma_diff(yi, theta) - (m / theta).ln_1p() + (m - yi) / (theta + m))
        .sum()
}

/// `∂²ℓ/∂θ²` at fixed means.
fn theta_hessian(y: &[f64], mu: &[f64], theta: f64) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &m)| {
            -trigamma_diff(yi, theta) + m / (theta * (theta + m)) - (m - yi) / ((theta + m) * (theta + m))
        })
        .sum()
}

/// Root of the θ-score on `[lo, hi]` by Newton in `ln θ`, falling back to
/// bisection whenever a step leaves the bracket or the curvature is wrong.
/// Returns `(θ, at_boundary)`.
fn maximize_theta(y: &[f64], mu: &[f64], start: f64, lo: f64, hi: f64) -> (f64, bool) {
    if theta_score(y, mu, hi) > 0.0 {
        return (hi, true);
    }
    if theta_score(y, mu, lo) <= 0.0 {
        return (lo, false);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut t = start.clamp(lo, hi).ln();
    for _ in 0..300 {
        let theta = t.exp();
        let g = theta_score(y, mu, theta);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let h = theta_hessian(y, mu, theta);
        let mut next = t - g / (theta * h);
        if !(h < 0.0) || !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || b - a <= 1e-14 * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    (t.exp(), false)
}

fn validate_counts<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<(), GlmError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(GlmError::InvalidOutcome(format!("{} outcomes for {} rows", y.len(), n)));
    }
    if let Some(bad) = y.iter().find(|&&v| v < T::zero() || v.fract() != T::zero() || !v.is_finite()) {
        return Err(GlmError::InvalidOutcome(format!("counts must be non-negative integers, found {bad}")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(GlmError::NoOutcomeVariation);
    }
    if n <= p {
        return Err(GlmError::TooFewObservations { n, p });
    }
    Ok(())
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|&a| a.as_f64()).collect()
}

/// Full NB2 log-likelihood, including the `ln Γ(y + 1)` constants.
pub fn log_likelihood<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], theta: T) -> T {
    let eta = to_f64(&x.mul_vec(beta));
    let th = theta.as_f64();
    let ll: f64 = y
        .iter()
        .zip(&eta)
        .map(|(&yi, &e)| {
            let yi = yi.as_f64();
            let mu = e.exp();
            ln_gamma_ratio(yi, th) - ln_gamma(yi + 1.0) - th * (mu / th).ln_1p() - yi * (th / mu).ln_1p()
        })
        .sum();
    T::of(ll)
}

/// Analytic scores `(∂ℓ/∂β, ∂ℓ/∂θ)`.
pub fn score<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], theta: T) -> (Vec<T>, T) {
    let eta = x.mul_vec(beta);
    let sb = irls_score(&NegBin { theta }, x, y, &eta);
    let mu: Vec<f64> = eta.iter().map(|&e| e.as_f64().exp()).collect();
    (sb, T::of(theta_score(&to_f64(y), &mu, theta.as_f64())))
}

/// Poisson log-likelihood including constants.
pub fn poisson_log_likelihood<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> T {
    let eta = x.mul_vec(beta);
    y.iter()
        .zip(&eta)
        .map(|(&yi, &e)| yi * e - e.exp() - T::of(ln_gamma(yi.as_f64() + 1.0)))
        .sum()
}

/// RMSE between `ln y` and the linear predictor over rows with `y > 0`.
fn log_rmse<T: Scalar>(y: &[T], eta: &[T]) -> Option<T> {
    let pairs: Vec<T> = y
        .iter()
        .zip(eta)
        .filter(|(&yi, _)| yi > T::zero())
        .map(|(&yi, &e)| (yi.ln() - e) * (yi.ln() - e))
        .collect();
    (!pairs.is_empty()).then(|| (pairs.iter().copied().sum::<T>() / T::of_usize(pairs.len())).sqrt())
}

fn poisson_irls<T: Scalar>(x: &Matrix<T>, y: &[T], names: &[String]) -> Result<IrlsFit<T>, GlmError> {
    let mu0 = y.iter().map(|&v| v + T::of(0.1)).collect();
    irls(&Poisson, x, y, Start::Mean(mu0), IrlsOptions::default()).map_err(|e| e.into_error(names))
}

/// Poisson log-linear regression; the `θ → ∞` limit of [`fit_negbin`].
pub fn fit_poisson<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<FitResult<T>, GlmError> {
    validate_counts(x, y)?;
    let p = x.cols();
    let names = default_names(p);
    let fit = poisson_irls(x, y, &names)?;
    let vcov = fit.weighted_qr.inverse_gram();
    let (std_errors, statistics, p_values) = wald(&fit.beta, &vcov, normal_two_sided_p);
    let ll = poisson_log_likelihood(x, y, &fit.beta);
    Ok(FitResult {
        family: Family::Poisson,
        names,
        rmse: log_rmse(y, &fit.eta),
        coefficients: fit.beta,
        std_errors,
        statistics,
        p_values,
        vcov,
        n_obs: y.len(),
        r_squared: None,
        adj_r_squared: None,
        log_likelihood: Some(ll),
        aic: Some(T::of(2.0) * T::of_usize(p) - T::of(2.0) * ll),
        theta: None,
        theta_at_boundary: false,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

/// NB2 regression with default options.
pub fn fit_negbin<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<FitResult<T>, GlmError> {
    fit_negbin_with(x, y, NegBinOptions::default())
}

pub fn fit_negbin_with<T: Scalar>(x: &Matrix<T>, y: &[T], opts: NegBinOptions) -> Result<FitResult<T>, GlmError> {
    validate_counts(x, y)?;
    let names = default_names(x.cols());
    let yf = to_f64(y);
    let tol = T::score_tolerance();

    let start = poisson_irls(x, y, &names)?;
    let mut beta = start.beta;
    let mut mu: Vec<f64> = start.eta.iter().map(|&e| e.as_f64().exp()).collect();

    // Method-of-moments starting dispersion.
    let excess: f64 = yf.iter().zip(&mu).map(|(&yi, &m)| (yi - m) * (yi - m) - m).sum();
    let mut theta = if excess > 0.0 { mu.iter().map(|m| m * m).sum::<f64>() / excess } else { opts.theta_max };

    let mut iterations = start.iterations;
    for _ in 0..opts.max_outer {
        let (new_theta, at_boundary) = maximize_theta(&yf, &mu, theta, opts.theta_min, opts.theta_max);
        let theta_t = T::of(new_theta);
        let fit = irls(&NegBin { theta: theta_t }, x, y, Start::Beta(beta.clone()), IrlsOptions::default())
            .map_err(|e: IrlsFailure<T>| e.into_error(&names))?;
        iterations += fit.iterations;

        let theta_stable = (new_theta - theta).abs() <= 1e-12 * new_theta;
        theta = new_theta;
        beta = fit.beta.clone();
        mu = fit.eta.iter().map(|&e| e.as_f64().exp()).collect();

        let score_beta = irls_score(&NegBin { theta: theta_t }, x, y, &fit.eta)
            .iter()
            .fold(T::zero(), |m, &s| m.max(s.abs()));
        let score_theta = if at_boundary { 0.0 } else { theta_score(&yf, &mu, theta).abs() };
        let converged = score_beta < tol && score_theta < tol.as_f64();
        if converged || (theta_stable && score_beta < tol) {
            return Ok(finish(x, y, fit, theta_t, at_boundary, names, iterations));
        }
    }
    Err(GlmError::NonConvergence { iterations, last_iterate: to_f64(&beta) })
}

fn finish<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    fit: IrlsFit<T>,
    theta: T,
    at_boundary: bool,
    names: Vec<String>,
    iterations: usize,
) -> FitResult<T> {
    let p = x.cols();
    let vcov = fit.weighted_qr.inverse_gram();
    let (std_errors, statistics, p_values) = wald(&fit.beta, &vcov, normal_two_sided_p);
    let ll = log_likelihood(x, y, &fit.beta, theta);
    FitResult {
        family: Family::NegativeBinomial,
        names,
        rmse: log_rmse(y, &fit.eta),
        coefficients: fit.beta,
        std_errors,
        statistics,
        p_values,
        vcov,
        n_obs: y.len(),
        r_squared: None,
        adj_r_squared: None,
        log_likelihood: Some(ll),
        aic: Some(T::of(2.0) * T::of_usize(p + 1) - T::of(2.0) * ll),
        theta: Some(theta),
        theta_at_boundary: at_boundary,
        converged: true,
        iterations,
    }
}
