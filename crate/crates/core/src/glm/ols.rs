use super::{default_names, wald, Family, FitResult, GlmError};
use crate::dist::t_two_sided_p;
use crate::linalg::{Matrix, PivotedQr};
use crate::scalar::Scalar;

/// Ordinary least squares via column-pivoted QR.
///
/// Standard errors use `σ̂² (XᵀX)⁻¹` with `σ̂² = RSS / (n − p)`; p-values are
/// two-sided t with `n − p` degrees of freedom. `rmse = √(RSS / n)`. R² is
/// centered when the design contains a constant column, uncentered
/// otherwise.
pub fn fit_ols<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<FitResult<T>, GlmError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(GlmError::InvalidOutcome(format!("{} outcomes for {} rows", y.len(), n)));
    }
    if n <= p {
        return Err(GlmError::TooFewObservations { n, p });
    }
    let names = default_names(p);
    let qr = PivotedQr::new(x);
    if !qr.is_full_rank() {
        return Err(GlmError::RankDeficient {
            columns: qr.dependent_columns().into_iter().map(|j| names[j].clone()).collect(),
        });
    }

    let beta = qr.solve(y);
    let fitted = x.mul_vec(&beta);
    let rss: T = y.iter().zip(&fitted).map(|(&yi, &fi)| (yi - fi) * (yi - fi)).sum();
    let df = n - p;
    let sigma2 = rss / T::of_usize(df);
    let vcov = qr.inverse_gram().map(|v| v * sigma2);
    let (std_errors, statistics, p_values) = wald(&beta, &vcov, |t| t_two_sided_p(t, df as f64));

    let has_constant = (0..p).any(|j| {
        let c = x.column(j);
        c.iter().all(|&v| v == c[0]) && c[0] != T::zero()
    });
    let tss: T = if has_constant {
        let m = crate::scalar::mean(y);
        y.iter().map(|&v| (v - m) * (v - m)).sum()
    } else {
        y.iter().map(|&v| v * v).sum()
    };
    let (r_squared, adj_r_squared) = if tss > T::zero() {
        let r2 = T::one() - rss / tss;
        let dof_total = if has_constant { n - 1 } else { n };
        let adj = T::one() - (T::one() - r2) * T::of_usize(dof_total) / T::of_usize(df);
        (Some(r2), Some(adj))
    } else {
        (None, None)
    };

    Ok(FitResult {
        family: Family::Ols,
        names,
        coefficients: beta,
        std_errors,
        statistics,
        p_values,
        vcov,
        n_obs: n,
        r_squared,
        adj_r_squared,
        log_likelihood: None,
        aic: None,
        rmse: Some((rss / T::of_usize(n)).sqrt()),
        theta: None,
        theta_at_boundary: false,
        converged: true,
        iterations: 1,
    })
}
