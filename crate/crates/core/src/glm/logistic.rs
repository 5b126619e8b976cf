//! Logistic regression by IRLS.

use super::irls::{irls, score as irls_score, IrlsFailure, IrlsOptions, Likelihood, Start};
use super::{default_names, wald, Family, FitResult, GlmError};
use crate::dist::normal_two_sided_p;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Linear predictors beyond this magnitude mean fitted probabilities within
/// ~1e-13 of 0 or 1, which only happens under separation.
const SEPARATION_ETA: f64 = 30.0;

pub fn inv_logit<T: Scalar>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + eᵗ)` without overflow.
fn softplus<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

struct Bernoulli;

impl<T: Scalar> Likelihood<T> for Bernoulli {
    fn mean(&self, eta: T) -> T {
        inv_logit(eta)
    }
    fn link(&self, mu: T) -> T {
        (mu / (T::one() - mu)).ln()
    }
    fn log_lik(&self, y: T, eta: T) -> T {
        y * eta - softplus(eta)
    }
    fn d_eta(&self, y: T, eta: T) -> T {
        y - inv_logit(eta)
    }
    fn weight(&self, eta: T) -> T {
        let p = inv_logit(eta);
        p * (T::one() - p)
    }
    fn d_eta_d_mu(&self, mu: T) -> T {
        T::one() / (mu * (T::one() - mu))
    }
}

/// Bernoulli log-likelihood of `y` under coefficients `beta`.
pub fn log_likelihood<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> T {
    let eta = x.mul_vec(beta);
    y.iter().zip(&eta).map(|(&yi, &e)| Likelihood::<T>::log_lik(&Bernoulli, yi, e)).sum()
}

/// Analytic score `Xᵀ(y − p)`.
pub fn score<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> Vec<T> {
    irls_score(&Bernoulli, x, y, &x.mul_vec(beta))
}

/// Maximum-likelihood logistic regression.
///
/// Converges when the largest score component falls below `1e-8` (scaled up
/// for `f32`) or the relative log-likelihood change falls below `1e-10`,
/// followed by one polishing step. Standard errors come from the inverse
/// Fisher information; p-values are two-sided normal.
pub fn fit_logistic<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<FitResult<T>, GlmError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(GlmError::InvalidOutcome(format!("{} outcomes for {} rows", y.len(), n)));
    }
    if let Some(bad) = y.iter().find(|&&v| v != T::zero() && v != T::one()) {
        return Err(GlmError::InvalidOutcome(format!("logistic outcome must be 0 or 1, found {bad}")));
    }
    let ones = y.iter().filter(|&&v| v == T::one()).count();
    if ones == 0 || ones == n {
        return Err(GlmError::NoOutcomeVariation);
    }
    if n <= p {
        return Err(GlmError::TooFewObservations { n, p });
    }
    let names = default_names(p);

    let fit = match irls(&Bernoulli, x, y, Start::Beta(vec![T::zero(); p]), IrlsOptions::default()) {
        Ok(f) => f,
        Err(IrlsFailure::NoConvergence { beta, eta, iterations }) if max_abs_eta(&eta) > T::of(SEPARATION_ETA / 2.0) => {
            return Err(GlmError::Separation { iterations, last_iterate: beta.into_iter().map(Scalar::as_f64).collect() })
        }
        Err(e) => return Err(e.into_error(&names)),
    };
    if max_abs_eta(&fit.eta) > T::of(SEPARATION_ETA) {
        return Err(GlmError::Separation {
            iterations: fit.iterations,
            last_iterate: fit.beta.into_iter().map(Scalar::as_f64).collect(),
        });
    }

    let vcov = fit.weighted_qr.inverse_gram();
    let (std_errors, statistics, p_values) = wald(&fit.beta, &vcov, normal_two_sided_p);
    let aic = T::of(2.0) * T::of_usize(p) - T::of(2.0) * fit.log_lik;

    Ok(FitResult {
        family: Family::Logistic,
        names,
        coefficients: fit.beta,
        std_errors,
        statistics,
        p_values,
        vcov,
        n_obs: n,
        r_squared: None,
        adj_r_squared: None,
        log_likelihood: Some(fit.log_lik),
        aic: Some(aic),
        rmse: None,
        theta: None,
        theta_at_boundary: false,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

fn max_abs_eta<T: Scalar>(eta: &[T]) -> T {
    eta.iter().fold(T::zero(), |m, &e| m.max(e.abs()))
}
