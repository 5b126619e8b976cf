//! Fisher scoring by iteratively reweighted least squares.
//!
//! Each step solves the weighted least-squares problem
//! `min ‖√W (z − Xβ)‖²` with working weights `W` and working response
//! `z = η + (y − μ)·dη/dμ` through the pivoted QR. A step that lowers the
//! log-likelihood is halved until it does not.

use super::GlmError;
use crate::linalg::{Matrix, PivotedQr};
use crate::scalar::Scalar;

/// Per-observation pieces of a GLM with a fixed link.
pub(crate) trait Likelihood<T: Scalar> {
    fn mean(&self, eta: T) -> T;
    fn link(&self, mu: T) -> T;
    /// Log-likelihood contribution up to terms constant in `η`.
    fn log_lik(&self, y: T, eta: T) -> T;
    /// `∂ℓ/∂η`.
    fn d_eta(&self, y: T, eta: T) -> T;
    /// Expected information weight.
    fn weight(&self, eta: T) -> T;
    /// `dη/dμ` at the given mean.
    fn d_eta_d_mu(&self, mu: T) -> T;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IrlsOptions<T> {
    pub max_iter: usize,
    pub score_tol: T,
    pub rel_loglik_tol: T,
}

impl<T: Scalar> Default for IrlsOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 100,
            score_tol: T::score_tolerance(),
            rel_loglik_tol: T::of(1e-10).max(T::epsilon() * T::of(10.0)),
        }
    }
}

pub(crate) enum Start<T> {
    Beta(Vec<T>),
    /// Starting means; the first step regresses `η(μ₀)` directly.
    Mean(Vec<T>),
}

#[derive(Debug, Clone)]
pub(crate) struct IrlsFit<T> {
    pub beta: Vec<T>,
    pub eta: Vec<T>,
    pub log_lik: T,
    pub iterations: usize,
    pub converged: bool,
    /// QR of `√W X` at the final iterate.
    pub weighted_qr: PivotedQr<T>,
}

pub(crate) fn score<T: Scalar, L: Likelihood<T>>(lik: &L, x: &Matrix<T>, y: &[T], eta: &[T]) -> Vec<T> {
    let r: Vec<T> = y.iter().zip(eta).map(|(&yi, &e)| lik.d_eta(yi, e)).collect();
    x.transpose_mul_vec(&r)
}

fn total_log_lik<T: Scalar, L: Likelihood<T>>(lik: &L, y: &[T], eta: &[T]) -> T {
    y.iter().zip(eta).map(|(&yi, &e)| lik.log_lik(yi, e)).sum()
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
}

fn weighted_step<T: Scalar, L: Likelihood<T>>(
    lik: &L,
    x: &Matrix<T>,
    y: &[T],
    eta: &[T],
    mu: &[T],
) -> Result<(Vec<T>, PivotedQr<T>), RankError> {
    let n = y.len();
    let mut sw = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let w = lik.weight(eta[i]).max(T::min_positive_value());
        let z = eta[i] + (y[i] - mu[i]) * lik.d_eta_d_mu(mu[i]);
        let s = w.sqrt();
        sw.push(s);
        rhs.push(z * s);
    }
    let qr = PivotedQr::new(&x.scale_rows(&sw));
    if !qr.is_full_rank() {
        return Err(RankError(qr.dependent_columns()));
    }
    Ok((qr.solve(&rhs), qr))
}

pub(crate) struct RankError(pub Vec<usize>);

pub(crate) fn irls<T: Scalar, L: Likelihood<T>>(
    lik: &L,
    x: &Matrix<T>,
    y: &[T],
    start: Start<T>,
    opts: IrlsOptions<T>,
) -> Result<IrlsFit<T>, IrlsFailure<T>> {
    let (mut beta, mut eta, mut ll, mut iterations) = match start {
        Start::Beta(b) => {
            let eta = x.mul_vec(&b);
            let ll = total_log_lik(lik, y, &eta);
            (b, eta, ll, 0)
        }
        Start::Mean(mu0) => {
            let eta0: Vec<T> = mu0.iter().map(|&m| lik.link(m)).collect();
            let (b, _) = weighted_step(lik, x, y, &eta0, &mu0).map_err(IrlsFailure::Rank)?;
            let eta = x.mul_vec(&b);
            let ll = total_log_lik(lik, y, &eta);
            (b, eta, ll, 1)
        }
    };

    let mut polishing = false;
    loop {
        let mu: Vec<T> = eta.iter().map(|&e| lik.mean(e)).collect();
        let (candidate, qr) = weighted_step(lik, x, y, &eta, &mu).map_err(IrlsFailure::Rank)?;
        iterations += 1;

        let mut step = candidate;
        let mut new_eta = x.mul_vec(&step);
        let mut new_ll = total_log_lik(lik, y, &new_eta);
        // Differences below summation round-off do not count as descent.
        let slack = T::epsilon() * T::of(32.0) * (ll.abs() + T::one());
        let mut halvings = 0;
        while !(new_ll >= ll - slack) && halvings < 30 {
            step = beta.iter().zip(&step).map(|(&b, &s)| (b + s) / T::of(2.0)).collect();
            new_eta = x.mul_vec(&step);
            new_ll = total_log_lik(lik, y, &new_eta);
            halvings += 1;
        }
        if !(new_ll >= ll - slack) {
            // No ascent possible from here; keep the current iterate.
            step = beta.clone();
            new_eta = eta.clone();
            new_ll = ll;
        }

        let rel_change = (new_ll - ll).abs() / (new_ll.abs() + T::of(0.1));
        beta = step;
        eta = new_eta;
        ll = new_ll;

        let sc = score(lik, x, y, &eta);
        if max_abs(&sc) < opts.score_tol || polishing {
            let mu: Vec<T> = eta.iter().map(|&e| lik.mean(e)).collect();
            let qr = match weighted_step(lik, x, y, &eta, &mu) {
                Ok((_, qr)) => qr,
                Err(_) => qr,
            };
            return Ok(IrlsFit { beta, eta, log_lik: ll, iterations, converged: true, weighted_qr: qr });
        }
        if rel_change < opts.rel_loglik_tol {
            // One more full step to drive the score to round-off.
            polishing = true;
        }
        if iterations >= opts.max_iter {
            return Err(IrlsFailure::NoConvergence { beta, eta, iterations });
        }
    }
}

pub(crate) enum IrlsFailure<T> {
    Rank(RankError),
    NoConvergence { beta: Vec<T>, eta: Vec<T>, iterations: usize },
}

impl<T: Scalar> IrlsFailure<T> {
    pub fn into_error(self, names: &[String]) -> GlmError {
        match self {
            IrlsFailure::Rank(RankError(cols)) => {
                GlmError::RankDeficient { columns: cols.into_iter().map(|j| names[j].clone()).collect() }
            }
            IrlsFailure::NoConvergence { beta, iterations, .. } => GlmError::NonConvergence {
                iterations,
                last_iterate: beta.into_iter().map(Scalar::as_f64).collect(),
            },
        }
    }
}
