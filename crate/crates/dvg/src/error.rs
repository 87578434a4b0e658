use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the model library.
#[derive(Debug, Error)]
pub enum DvgError {
    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("m.g.f. undefined at c = {c}: b - c*mu - c^2*sigma^2/2 = {denom} must be positive")]
    MgfDomain { c: f64, denom: f64 },

    #[error("complex log argument {arg} on or too close to the branch cut (step {step})")]
    BranchCut { step: usize, arg: Complex64 },

    #[error("degenerate distribution (sigma = 0 and mu = 0): density is a point mass")]
    DegenerateDensity,

    #[error("Laguerre node search did not converge (order {order}, node {index})")]
    QuadratureConvergence { order: usize, index: usize },

    #[error(
        "Esscher verification failed: |M(theta*+1)/M(theta*) - e^r| = {deviation:.3e} \
         with denominator D(theta*) = {denominator}"
    )]
    EsscherVerification { deviation: f64, denominator: f64 },

    #[error("measure change undefined: D(theta*) = {denominator} is not positive")]
    MeasureChange { denominator: f64 },

    #[error("integration did not converge: {reason}")]
    Integration { reason: String },

    #[error("density grid needs refinement: {reason}")]
    GridRefinement { reason: String },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("likelihood-ratio statistic is negative ({statistic}): refit the models")]
    NegativeLrStatistic { statistic: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T> = std::result::Result<T, DvgError>;

impl DvgError {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            DvgError::InvalidParameter { .. } | DvgError::NotEnoughData(_)
        )
    }
}
