//! Conditional Esscher change of measure.
//!
//! The per-period tilt `Λ_t = e^{θY_t}/M_t(θ)` with θ solving
//! `M_t(θ+1)/M_t(θ) = e^r` prices the asset as a martingale. With mixture
//! innovations the root is `θ* = -(λ/σ² + 1/2)`, independent of the state,
//! and the tilted one-period law is again of the same family with
//!
//! ```text
//! σ_Q² = σ² / D(θ*),   λ_Q = (λ + θ*σ²)/D(θ*) = -σ_Q²/2,
//! D(θ)  = 1 - θλ - θ²σ²/2.
//! ```
//!
//! The risk-neutral state recursion keeps its shape after rescaling by
//! `a(σ_Q² + λ_Q²)`.

use serde::Serialize;

use crate::dynamics::{DvgParams, QParams};
use crate::error::{DvgError, Result};

/// Summary of the measure change for one parameter set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EsscherMap {
    pub theta_star: f64,
    pub lambda_q: f64,
    pub sigma_q: f64,
    /// State rescaling factor `a(σ_Q² + λ_Q²)`.
    pub scale: f64,
}

fn esscher_denominator(p: &DvgParams, theta: f64) -> f64 {
    1.0 - theta * p.lambda - theta * theta * p.sigma * p.sigma / 2.0
}

/// Closed-form Esscher parameter `θ* = -(λ/σ² + 1/2)`, verified numerically
/// against the defining equation through the mixture m.g.f. before returning.
pub fn esscher_parameter(p: &DvgParams) -> Result<f64> {
    if p.sigma <= 0.0 {
        return Err(DvgError::InvalidParameter {
            name: "sigma",
            value: p.sigma,
            constraint: "the Esscher parameter requires sigma > 0",
        });
    }
    let theta = -(p.lambda / (p.sigma * p.sigma) + 0.5);
    let d_star = esscher_denominator(p, theta);
    let d_next = esscher_denominator(p, theta + 1.0);
    if d_star <= 0.0 || d_next <= 0.0 {
        return Err(DvgError::MeasureChange { denominator: d_star.min(d_next) });
    }
    // verification through the m.g.f. of the conditional return law
    let vg = p.conditional_vg(p.h1);
    let ratio = vg.mgf_real(theta + 1.0)? / vg.mgf_real(theta)?;
    let target = p.r.exp();
    let deviation = ((ratio - target) / target).abs();
    if deviation > 1e-10 {
        return Err(DvgError::EsscherVerification { deviation, denominator: d_star });
    }
    Ok(theta)
}

/// Computes the full measure-change summary.
pub fn esscher_map(p: &DvgParams) -> Result<EsscherMap> {
    let theta = esscher_parameter(p)?;
    let d = esscher_denominator(p, theta);
    if d <= 0.0 {
        return Err(DvgError::MeasureChange { denominator: d });
    }
    let sigma_q2 = p.sigma * p.sigma / d;
    let lambda_q = -sigma_q2 / 2.0;
    Ok(EsscherMap {
        theta_star: theta,
        lambda_q,
        sigma_q: sigma_q2.sqrt(),
        scale: p.a * (sigma_q2 + lambda_q * lambda_q),
    })
}

/// Maps historical parameters to the rescaled risk-neutral set: the state
/// becomes the risk-neutral conditional variance, `a_Q = 1/(σ_Q² + λ_Q²)`,
/// and `α₀, α₁, h₁` pick up the rescaling factor while `β₁` is unchanged.
pub fn to_risk_neutral(p: &DvgParams) -> Result<QParams> {
    let map = esscher_map(p)?;
    QParams::new(
        p.r,
        map.sigma_q,
        1.0 / (map.sigma_q * map.sigma_q + map.lambda_q * map.lambda_q),
        map.scale * p.alpha0,
        map.scale * p.alpha1,
        p.beta1,
        map.scale * p.h1,
    )
}

/// One-period Radon-Nikodym weight `Λ_t = e^{θ*Y_t} / M_t(θ*)` given the
/// state `h_t` that governed the return, for reweighting historical paths.
pub fn radon_nikodym_weight(p: &DvgParams, y: f64, h: f64) -> Result<f64> {
    let theta = esscher_parameter(p)?;
    let m = p.conditional_vg(h).mgf_real(theta)?;
    Ok((theta * y).exp() / m)
}

/// The paper-printed algebraic form `λ_Q = 4σ⁴/(σ⁴ - 4λ² - 8σ²)`; equal to
/// the ratio-derived value wherever both are defined.
pub fn lambda_q_rational_form(lambda: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    4.0 * s2 * s2 / (s2 * s2 - 4.0 * lambda * lambda - 8.0 * s2)
}
