//! Neighborhood-level analysis of community vibrancy and crime.
//!
//! Point events (block-party permits, crime reports) are joined to census
//! block groups, aggregated into vibrancy and crime measures, and analyzed
//! with OLS / negative-binomial / logistic regressions, per-neighborhood
//! trend classification and propensity-score matching. [`synth`] builds
//! synthetic cities with known ground truth for every estimator.
//!
//! The numerical kernels are generic over [`Scalar`] (`f32` or `f64`);
//! geometry, counts and the pipeline work in `f64`.

pub mod dist;
pub mod glm;
pub mod ingest;
pub mod linalg;
pub mod measures;
pub mod pipeline;
pub mod psm;
pub mod scalar;
pub mod synth;
pub mod table;
pub mod trends;

pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type FitResult64 = glm::FitResult<f64>;
pub type TrendResult64 = trends::Trend<f64>;
pub type MatchedExperiment64 = psm::MatchedExperiment<f64>;

/// Sizes the global worker pool used for parallel models, experiments and
/// spatial joins. Call once, before any parallel work.
pub fn set_threads(n: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
}
