//! State recursion and path simulation for the dynamic mixture model under
//! the historical and risk-neutral measures.
//!
//! One period: `V_t | F_{t-1} ~ Gamma(a·h_t, 1)`, `Z_t ~ N(0,1)`,
//! `Y_t = r + λ·V_t + σ·√V_t·Z_t`, and the state advances through
//! `h_{t+1} = α₀ + α₁·V_t + β₁·h_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DvgError, Result};
use crate::mixture::VgParams;

/// Historical-measure (P) parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvgParams {
    /// Per-period risk-free log-rate.
    pub r: f64,
    /// Risk premium.
    pub lambda: f64,
    /// Mixture volatility (zero gives the pure-Gamma submodel).
    pub sigma: f64,
    /// Shape scale multiplying the state.
    pub a: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// State governing the first simulated return.
    pub h1: f64,
}

/// Risk-neutral (Q) parameter set. The drift is not free: `λ_Q = -σ_Q²/2`
/// makes the discounted price a one-step martingale identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QParams {
    pub r: f64,
    pub sigma_q: f64,
    pub a: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub h1: f64,
}

fn check_common(
    sigma: f64,
    a: f64,
    alpha0: f64,
    alpha1: f64,
    beta1: f64,
    h1: f64,
) -> Result<()> {
    for (name, value) in [
        ("sigma", sigma),
        ("a", a),
        ("alpha0", alpha0),
        ("alpha1", alpha1),
        ("beta1", beta1),
        ("h1", h1),
    ] {
        if !value.is_finite() {
            return Err(DvgError::InvalidParameter {
                name,
                value,
                constraint: "must be finite",
            });
        }
    }
    if sigma < 0.0 {
        return Err(DvgError::InvalidParameter {
            name: "sigma",
            value: sigma,
            constraint: "must be >= 0",
        });
    }
    if a <= 0.0 {
        return Err(DvgError::InvalidParameter {
            name: "a",
            value: a,
            constraint: "must be > 0",
        });
    }
    for (name, value) in [("alpha0", alpha0), ("alpha1", alpha1), ("beta1", beta1)] {
        if value < 0.0 {
            return Err(DvgError::InvalidParameter {
                name,
                value,
                constraint: "must be >= 0",
            });
        }
    }
    if h1 <= 0.0 {
        return Err(DvgError::InvalidParameter {
            name: "h1",
            value: h1,
            constraint: "must be > 0",
        });
    }
    Ok(())
}

impl DvgParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: f64,
        lambda: f64,
        sigma: f64,
        a: f64,
        alpha0: f64,
        alpha1: f64,
        beta1: f64,
        h1: f64,
    ) -> Result<Self> {
        if !r.is_finite() || !lambda.is_finite() {
            return Err(DvgError::InvalidParameter {
                name: "r/lambda",
                value: if r.is_finite() { lambda } else { r },
                constraint: "must be finite",
            });
        }
        check_common(sigma, a, alpha0, alpha1, beta1, h1)?;
        Ok(DvgParams { r, lambda, sigma, a, alpha0, alpha1, beta1, h1 })
    }

    /// Constructor with the redundancy resolved as `a = 1/(σ² + λ²)`, so
    /// that the conditional variance of the return equals `h_t` exactly.
    #[allow(clippy::too_many_arguments)]
    pub fn with_variance_identification(
        r: f64,
        lambda: f64,
        sigma: f64,
        alpha0: f64,
        alpha1: f64,
        beta1: f64,
        h1: f64,
    ) -> Result<Self> {
        let denom = sigma * sigma + lambda * lambda;
        if denom <= 0.0 {
            return Err(DvgError::InvalidParameter {
                name: "sigma",
                value: sigma,
                constraint: "sigma^2 + lambda^2 must be > 0 for the variance identification",
            });
        }
        Self::new(r, lambda, sigma, 1.0 / denom, alpha0, alpha1, beta1, h1)
    }

    /// Advances the state one period.
    pub fn step_state(&self, h: f64, v: f64) -> f64 {
        step_state(self.alpha0, self.alpha1, self.beta1, h, v)
    }

    /// First-moment stationarity: `α₁·a + β₁ < 1`.
    pub fn is_stationary(&self) -> bool {
        self.alpha1 * self.a + self.beta1 < 1.0
    }

    /// Fixed point of `E[h_{t+1}] = α₀ + α₁·a·E[h_t] + β₁·E[h_t]`, when the
    /// stationarity condition holds.
    pub fn stationary_state_mean(&self) -> Option<f64> {
        if self.is_stationary() {
            Some(self.alpha0 / (1.0 - self.alpha1 * self.a - self.beta1))
        } else {
            None
        }
    }

    /// Conditional one-period return distribution given state `h`.
    pub fn conditional_vg(&self, h: f64) -> VgParams {
        VgParams {
            mu0: self.r,
            mu: self.lambda,
            sigma: self.sigma,
            a: self.a * h,
            b: 1.0,
        }
    }
}

impl QParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: f64,
        sigma_q: f64,
        a: f64,
        alpha0: f64,
        alpha1: f64,
        beta1: f64,
        h1: f64,
    ) -> Result<Self> {
        if !r.is_finite() {
            return Err(DvgError::InvalidParameter {
                name: "r",
                value: r,
                constraint: "must be finite",
            });
        }
        check_common(sigma_q, a, alpha0, alpha1, beta1, h1)?;
        if sigma_q <= 0.0 {
            return Err(DvgError::InvalidParameter {
                name: "sigma_q",
                value: sigma_q,
                constraint: "must be > 0",
            });
        }
        Ok(QParams { r, sigma_q, a, alpha0, alpha1, beta1, h1 })
    }

    /// Constructor with `a = 1/(σ_Q² + λ_Q²)`, the identification under which
    /// the state is the risk-neutral conditional variance.
    pub fn with_variance_identification(
        r: f64,
        sigma_q: f64,
        alpha0: f64,
        alpha1: f64,
        beta1: f64,
        h1: f64,
    ) -> Result<Self> {
        let lq = -sigma_q * sigma_q / 2.0;
        let a = 1.0 / (sigma_q * sigma_q + lq * lq);
        Self::new(r, sigma_q, a, alpha0, alpha1, beta1, h1)
    }

    /// The implied drift `λ_Q = -σ_Q²/2`.
    pub fn lambda_q(&self) -> f64 {
        -self.sigma_q * self.sigma_q / 2.0
    }

    pub fn step_state(&self, h: f64, v: f64) -> f64 {
        step_state(self.alpha0, self.alpha1, self.beta1, h, v)
    }

    pub fn is_stationary(&self) -> bool {
        self.alpha1 * self.a + self.beta1 < 1.0
    }

    pub fn stationary_state_mean(&self) -> Option<f64> {
        if self.is_stationary() {
            Some(self.alpha0 / (1.0 - self.alpha1 * self.a - self.beta1))
        } else {
            None
        }
    }

    pub fn conditional_vg(&self, h: f64) -> VgParams {
        VgParams {
            mu0: self.r,
            mu: self.lambda_q(),
            sigma: self.sigma_q,
            a: self.a * h,
            b: 1.0,
        }
    }
}

/// `h_{t+1} = α₀ + α₁·V_t + β₁·h_t`.
pub fn step_state(alpha0: f64, alpha1: f64, beta1: f64, h: f64, v: f64) -> f64 {
    alpha0 + alpha1 * v + beta1 * h
}

/// One simulated path. `y[t]`, `v[t]` are the return and mixing draw for
/// period `t`; `h[t]` is the state governing them, with `h[T]` the
/// post-terminal state so every recorded step satisfies the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Terminal log-price increment `Σ Y_t`.
    pub fn log_return(&self) -> f64 {
        self.y.iter().sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

struct StepDynamics {
    r: f64,
    lambda: f64,
    sigma: f64,
    a: f64,
    alpha0: f64,
    alpha1: f64,
    beta1: f64,
    h1: f64,
}

fn simulate_impl(d: &StepDynamics, cfg: &SimConfig) -> Result<Vec<PathSample>> {
    if cfg.steps == 0 {
        return Err(DvgError::InvalidParameter {
            name: "steps",
            value: 0.0,
            constraint: "must be >= 1",
        });
    }
    if cfg.n_paths == 0 {
        return Err(DvgError::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            constraint: "must be >= 1",
        });
    }
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|path_idx| {
            // independent sub-stream per path, derived from the master seed
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path_idx as u64 + 1);
            simulate_one(d, cfg.steps, &mut rng)
        })
        .collect())
}

fn simulate_one<R: Rng>(d: &StepDynamics, steps: usize, rng: &mut R) -> PathSample {
    let mut y = Vec::with_capacity(steps);
    let mut v = Vec::with_capacity(steps);
    let mut h = Vec::with_capacity(steps + 1);
    let mut state = d.h1;
    h.push(state);
    for _ in 0..steps {
        // the state can underflow on long α₀ = 0 paths; the sampler's shape
        // must stay strictly positive
        let shape = (d.a * state).max(1e-300);
        let gamma = Gamma::new(shape, 1.0).expect("positive shape");
        let vt: f64 = gamma.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        y.push(d.r + d.lambda * vt + d.sigma * vt.sqrt() * z);
        v.push(vt);
        state = step_state(d.alpha0, d.alpha1, d.beta1, state, vt);
        h.push(state);
    }
    PathSample { y, v, h }
}

/// Simulates under the historical measure.
pub fn simulate_p(p: &DvgParams, cfg: &SimConfig) -> Result<Vec<PathSample>> {
    simulate_impl(
        &StepDynamics {
            r: p.r,
            lambda: p.lambda,
            sigma: p.sigma,
            a: p.a,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            beta1: p.beta1,
            h1: p.h1,
        },
        cfg,
    )
}

/// Simulates under the risk-neutral measure (`λ_Q = -σ_Q²/2`).
pub fn simulate_q(q: &QParams, cfg: &SimConfig) -> Result<Vec<PathSample>> {
    simulate_impl(
        &StepDynamics {
            r: q.r,
            lambda: q.lambda_q(),
            sigma: q.sigma_q,
            a: q.a,
            alpha0: q.alpha0,
            alpha1: q.alpha1,
            beta1: q.beta1,
            h1: q.h1,
        },
        cfg,
    )
}

/// The two nested special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Submodel {
    /// `α₀ = α₁ = 0, β₁ = 1`: i.i.d. Variance-Gamma returns.
    IidVg,
    /// `σ = 0`: pure-Gamma innovations with the same state recursion.
    GammaGarch,
}

/// Restricts a parameter set to one of the nested submodels.
pub fn submodel(kind: Submodel, base: &DvgParams) -> DvgParams {
    let mut p = *base;
    match kind {
        Submodel::IidVg => {
            p.alpha0 = 0.0;
            p.alpha1 = 0.0;
            p.beta1 = 1.0;
        }
        Submodel::GammaGarch => {
            p.sigma = 0.0;
        }
    }
    p
}
