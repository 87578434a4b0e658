//! Historical maximum-likelihood estimation of five nested conditional
//! volatility models sharing the variance recursion
//!
//! ```text
//! Y_t = r + λ·V_t + √V_t·Z_t
//! V_t = α₀ + α₁·(Z_{t-1} - γ·√V_{t-1})² + β₁·V_{t-1}
//! ```
//!
//! with innovations either standard normal or standardized mixture
//! (`SVG(α, k)`). The ladder: MOD1 normal γ=0, MOD2 normal, MOD3 symmetric
//! mixture γ=0, MOD4 symmetric mixture, MOD5 asymmetric mixture. Innovation
//! densities are evaluated through the Laguerre discretization of the mixing
//! integral.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;

use crate::error::{DvgError, Result};
use crate::mixture::{DensityKernel, SvgParams};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::quadrature::GaussLaguerre;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Innovation law of the standardized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Innovation {
    Normal,
    SvgSymmetric { k: f64 },
    Svg { alpha: f64, k: f64 },
}

/// Which asymmetry term drives the variance recursion.
///
/// `Scaled` is the canonical `(Z - γ·√V)²`; `Raw` is the literal `(Z - γ)²`
/// variant, kept behind this flag because the latter is dimensionally
/// inconsistent for fitted γ of order 10²: a standard-normal `Z` is O(1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarianceAsymmetry {
    Scaled,
    Raw,
}

/// Full parameter set of the variance-recursion models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HnParams {
    /// Per-period risk-free log-rate (fixed, not estimated).
    pub r: f64,
    pub lambda: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub innovation: Innovation,
    /// Initial variance.
    pub v1: f64,
}

impl HnParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DvgError::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite and >= 0",
                });
            }
        }
        if !(self.v1.is_finite() && self.v1 > 0.0) {
            return Err(DvgError::InvalidParameter {
                name: "v1",
                value: self.v1,
                constraint: "must be > 0",
            });
        }
        if let Innovation::Svg { alpha, k } = normalize_innovation(self.innovation) {
            SvgParams::new(alpha, k)?;
        }
        Ok(())
    }
}

fn normalize_innovation(innovation: Innovation) -> Innovation {
    match innovation {
        Innovation::SvgSymmetric { k } => Innovation::Svg { alpha: 0.0, k },
        other => other,
    }
}

/// The five nested specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelId {
    Mod1,
    Mod2,
    Mod3,
    Mod4,
    Mod5,
}

impl std::str::FromStr for ModelId {
    type Err = DvgError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MOD1" => Ok(ModelId::Mod1),
            "MOD2" => Ok(ModelId::Mod2),
            "MOD3" => Ok(ModelId::Mod3),
            "MOD4" => Ok(ModelId::Mod4),
            "MOD5" => Ok(ModelId::Mod5),
            _ => Err(DvgError::InvalidParameter {
                name: "model",
                value: f64::NAN,
                constraint: "expected one of MOD1..MOD5",
            }),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelId::Mod1 => "MOD1",
            ModelId::Mod2 => "MOD2",
            ModelId::Mod3 => "MOD3",
            ModelId::Mod4 => "MOD4",
            ModelId::Mod5 => "MOD5",
        };
        f.write_str(s)
    }
}

impl ModelId {
    pub fn has_gamma(&self) -> bool {
        matches!(self, ModelId::Mod2 | ModelId::Mod4 | ModelId::Mod5)
    }

    pub fn has_k(&self) -> bool {
        matches!(self, ModelId::Mod3 | ModelId::Mod4 | ModelId::Mod5)
    }

    pub fn has_alpha(&self) -> bool {
        matches!(self, ModelId::Mod5)
    }

    /// Free parameters in reporting order.
    pub fn param_names(&self) -> Vec<&'static str> {
        let mut names = vec!["lambda", "alpha0", "alpha1", "beta1"];
        if self.has_gamma() {
            names.push("gamma");
        }
        if self.has_k() {
            names.push("k");
        }
        if self.has_alpha() {
            names.push("alpha");
        }
        names
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }
}

/// Log-density of a standardized mixture innovation via the quadrature
/// kernel, floored at `floor` (counted by the caller through the flag).
pub fn svg_log_density(s: &SvgParams, z: f64, rule: &GaussLaguerre) -> f64 {
    let kernel = s
        .to_vg()
        .density_kernel(rule)
        .expect("valid standardized parameters");
    kernel.log_density(z)
}

/// Per-period log-likelihood filter. Returns `-inf` when the variance path
/// degenerates, so optimizers can back away rather than abort.
fn filter_loglik(
    params: &HnParams,
    returns: &[f64],
    kernel: Option<&DensityKernel>,
    asymmetry: VarianceAsymmetry,
    floor_ln: f64,
) -> (f64, usize) {
    let mut v = params.v1;
    let mut ll = 0.0;
    let mut floored = 0usize;
    for &y in returns {
        if !(v.is_finite() && v > 0.0) {
            return (f64::NEG_INFINITY, floored);
        }
        let sv = v.sqrt();
        let z = (y - params.r - params.lambda * v) / sv;
        let lz = match kernel {
            None => -0.5 * LN_2PI - 0.5 * z * z,
            Some(k) => {
                let l = k.log_density(z);
                if l < floor_ln {
                    floored += 1;
                    floor_ln
                } else {
                    l
                }
            }
        };
        ll += lz - sv.ln();
        let dev = match asymmetry {
            VarianceAsymmetry::Scaled => z - params.gamma * sv,
            VarianceAsymmetry::Raw => z - params.gamma,
        };
        v = params.alpha0 + params.alpha1 * dev * dev + params.beta1 * v;
    }
    (ll, floored)
}

fn innovation_kernel(
    innovation: Innovation,
    rule: &GaussLaguerre,
) -> Result<Option<DensityKernel>> {
    match normalize_innovation(innovation) {
        Innovation::Normal => Ok(None),
        Innovation::Svg { alpha, k } => Ok(Some(
            SvgParams::new(alpha, k)?.to_vg().density_kernel(rule)?,
        )),
        Innovation::SvgSymmetric { .. } => unreachable!("normalized above"),
    }
}

fn check_model_consistency(model: ModelId, params: &HnParams) -> Result<()> {
    let gamma_ok = model.has_gamma() || params.gamma == 0.0;
    let innovation_ok = match (model, normalize_innovation(params.innovation)) {
        (ModelId::Mod1 | ModelId::Mod2, Innovation::Normal) => true,
        (ModelId::Mod3 | ModelId::Mod4, Innovation::Svg { alpha, .. }) => alpha == 0.0,
        (ModelId::Mod5, Innovation::Svg { .. }) => true,
        _ => false,
    };
    if !gamma_ok {
        return Err(DvgError::InvalidParameter {
            name: "gamma",
            value: params.gamma,
            constraint: "must be 0 for MOD1/MOD3",
        });
    }
    if !innovation_ok {
        return Err(DvgError::InvalidParameter {
            name: "innovation",
            value: f64::NAN,
            constraint: "innovation family inconsistent with the model id",
        });
    }
    Ok(())
}

/// Log-likelihood of a return series under the given specification.
pub fn loglik(
    model: ModelId,
    params: &HnParams,
    returns: &[f64],
    rule: &GaussLaguerre,
    asymmetry: VarianceAsymmetry,
) -> Result<f64> {
    if returns.len() < 2 {
        return Err(DvgError::NotEnoughData(format!(
            "{} observations; need at least 2",
            returns.len()
        )));
    }
    params.validate()?;
    check_model_consistency(model, params)?;
    let kernel = innovation_kernel(params.innovation, rule)?;
    let (ll, _) = filter_loglik(params, returns, kernel.as_ref(), asymmetry, (1e-300f64).ln());
    Ok(ll)
}

/// Simulates a return series from the model (for fixtures and recovery
/// experiments).
pub fn simulate_hn(
    params: &HnParams,
    n: usize,
    seed: u64,
    asymmetry: VarianceAsymmetry,
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let svg = match normalize_innovation(params.innovation) {
        Innovation::Normal => None,
        Innovation::Svg { alpha, k } => Some(SvgParams::new(alpha, k)?.to_vg()),
        Innovation::SvgSymmetric { .. } => unreachable!(),
    };
    let mut v = params.v1;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = match &svg {
            None => StandardNormal.sample(&mut rng),
            Some(vg) => vg.sample(&mut rng),
        };
        let sv = v.sqrt();
        out.push(params.r + params.lambda * v + sv * z);
        let dev = match asymmetry {
            VarianceAsymmetry::Scaled => z - params.gamma * sv,
            VarianceAsymmetry::Raw => z - params.gamma,
        };
        v = params.alpha0 + params.alpha1 * dev * dev + params.beta1 * v;
    }
    Ok(out)
}

/// Controls for [`fit`].
#[derive(Debug, Clone)]
pub struct EstimationConfig {
    /// Per-period risk-free log-rate held fixed during estimation.
    pub rate: f64,
    pub quad_order: usize,
    pub asymmetry: VarianceAsymmetry,
    pub density_floor: f64,
    pub n_starts: usize,
    pub max_evals_per_start: usize,
    pub seed: u64,
    /// Initial variance; defaults to the sample variance of the returns.
    pub v1: Option<f64>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            rate: 0.0,
            quad_order: 10,
            asymmetry: VarianceAsymmetry::Scaled,
            density_floor: 1e-300,
            n_starts: 8,
            max_evals_per_start: 6000,
            seed: 1,
            v1: None,
        }
    }
}

/// A fitted model: estimates in reporting order with asymptotic standard
/// errors from the finite-difference observed information.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: ModelId,
    pub param_names: Vec<&'static str>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_evals: usize,
    /// Parameters pinned near a transform boundary (likelihood surface flat
    /// on one side; the chi-square theory is heuristic there).
    pub at_boundary: Vec<bool>,
    pub floored_observations: usize,
    pub params: HnParams,
}

struct Packing {
    model: ModelId,
}

impl Packing {
    fn dim(&self) -> usize {
        self.model.n_params()
    }

    /// natural -> unconstrained
    fn pack(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = vec![
            theta[0],
            theta[1].max(1e-300).ln(),
            theta[2].max(1e-300).ln(),
            logit(theta[3].clamp(1e-12, 1.0 - 1e-12)),
        ];
        let mut idx = 4;
        if self.model.has_gamma() {
            x.push(theta[idx] / 100.0);
            idx += 1;
        }
        if self.model.has_k() {
            let k = theta[idx];
            idx += 1;
            if self.model.has_alpha() {
                let alpha = theta[idx];
                x.push((k - alpha * alpha).max(1e-12).ln());
                x.push(alpha);
            } else {
                x.push(k.ln());
            }
        }
        x
    }

    /// unconstrained -> natural
    fn unpack(&self, x: &[f64]) -> Vec<f64> {
        let mut theta = vec![x[0], x[1].exp(), x[2].exp(), sigmoid(x[3])];
        let mut idx = 4;
        if self.model.has_gamma() {
            theta.push(x[idx] * 100.0);
            idx += 1;
        }
        if self.model.has_k() {
            if self.model.has_alpha() {
                let delta = x[idx];
                let alpha = x[idx + 1];
                theta.push(alpha * alpha + delta.exp()); // k > alpha²
                theta.push(alpha);
            } else {
                theta.push(x[idx].exp());
            }
        }
        theta
    }

    fn to_params(&self, theta: &[f64], rate: f64, v1: f64) -> HnParams {
        let mut gamma = 0.0;
        let mut idx = 4;
        if self.model.has_gamma() {
            gamma = theta[idx];
            idx += 1;
        }
        let innovation = if self.model.has_k() {
            let k = theta[idx];
            if self.model.has_alpha() {
                Innovation::Svg { alpha: theta[idx + 1], k }
            } else {
                Innovation::SvgSymmetric { k }
            }
        } else {
            Innovation::Normal
        };
        HnParams {
            r: rate,
            lambda: theta[0],
            alpha0: theta[1],
            alpha1: theta[2],
            beta1: theta[3],
            gamma,
            innovation,
            v1,
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sample_mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Maximizes the likelihood by multi-start Nelder-Mead in transformed
/// coordinates, then reports standard errors from the observed information.
pub fn fit(model: ModelId, returns: &[f64], cfg: &EstimationConfig) -> Result<FitResult> {
    if returns.len() < 10 {
        return Err(DvgError::NotEnoughData(format!(
            "{} observations; need at least 10 to fit",
            returns.len()
        )));
    }
    let rule = GaussLaguerre::new(cfg.quad_order)?;
    let (mean, var) = sample_mean_var(returns);
    let v1 = cfg.v1.unwrap_or(var);
    if !(v1 > 0.0) {
        return Err(DvgError::InvalidParameter {
            name: "v1",
            value: v1,
            constraint: "initial variance must be > 0",
        });
    }
    let packing = Packing { model };

    // moment-matched starting point
    let skew = {
        let n = returns.len() as f64;
        let third = returns.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        third / var.powf(1.5)
    };
    let kurt = {
        let n = returns.len() as f64;
        let fourth = returns.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        fourth / (var * var)
    };
    let mut theta0 = vec![(mean - cfg.rate) / var, 0.15 * var, 0.15 * var, 0.7];
    if model.has_gamma() {
        theta0.push(0.0);
    }
    if model.has_k() {
        let k0 = (3.0 / (kurt - 3.0).max(0.15)).clamp(0.3, 30.0);
        theta0.push(k0);
        if model.has_alpha() {
            let a0 = (skew * k0 / 3.0).clamp(-0.8 * k0.sqrt(), 0.8 * k0.sqrt());
            theta0.push(a0);
        }
    }
    let x0 = packing.pack(&theta0);

    let floor_ln = cfg.density_floor.ln();
    let objective = |x: &[f64]| -> f64 {
        let theta = packing.unpack(x);
        let params = packing.to_params(&theta, cfg.rate, v1);
        let kernel = match innovation_kernel(params.innovation, &rule) {
            Ok(k) => k,
            Err(_) => return f64::INFINITY,
        };
        let (ll, _) = filter_loglik(&params, returns, kernel.as_ref(), cfg.asymmetry, floor_ln);
        -ll
    };

    // start cloud: the moment-matched point plus seeded perturbations
    let spread: Vec<f64> = x0
        .iter()
        .enumerate()
        .map(|(i, _)| match i {
            0 => 0.5,
            1 | 2 => 0.8,
            3 => 0.7,
            _ => 0.4,
        })
        .collect();
    let mut starts = vec![x0.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 1..cfg.n_starts.max(1) {
        let mut s = x0.clone();
        for (i, v) in s.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += spread[i] * z;
        }
        starts.push(s);
    }

    let nm_cfg = NelderMeadConfig {
        max_evals: cfg.max_evals_per_start,
        f_tol: 1e-10,
        x_tol: 1e-9,
    };
    let step: Vec<f64> = spread.iter().map(|s| 0.25 * s).collect();
    let mut runs: Vec<crate::optim::OptimResult> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, s, &step, &nm_cfg))
        .collect();
    // best likelihood first; ties broken by the smaller coordinate norm
    runs.sort_by(|a, b| {
        a.f.partial_cmp(&b.f).unwrap().then_with(|| {
            let na: f64 = a.x.iter().map(|v| v * v).sum();
            let nb: f64 = b.x.iter().map(|v| v * v).sum();
            na.partial_cmp(&nb).unwrap()
        })
    });
    let mut best = runs.remove(0);
    // polish around the winner
    let polish = nelder_mead(
        objective,
        &best.x,
        &step.iter().map(|s| 0.02 * s).collect::<Vec<_>>(),
        &nm_cfg,
    );
    let total_evals = best.n_evals
        + polish.n_evals
        + runs.iter().map(|r| r.n_evals).sum::<usize>();
    if polish.f <= best.f {
        best = polish;
    }

    let theta = packing.unpack(&best.x);
    let params = packing.to_params(&theta, cfg.rate, v1);
    let kernel = innovation_kernel(params.innovation, &rule)?;
    let (ll, floored) =
        filter_loglik(&params, returns, kernel.as_ref(), cfg.asymmetry, floor_ln);
    if !ll.is_finite() {
        return Err(DvgError::Optimization(
            "likelihood not finite at the reported optimum".into(),
        ));
    }

    let std_errors = standard_errors(&packing, &theta, returns, &rule, cfg, v1);
    let at_boundary = boundary_flags(&packing, &theta);

    Ok(FitResult {
        model,
        param_names: model.param_names(),
        estimates: theta,
        std_errors,
        log_likelihood: ll,
        converged: best.converged,
        n_evals: total_evals,
        at_boundary,
        floored_observations: floored,
        params,
    })
}

fn boundary_flags(packing: &Packing, theta: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; packing.dim()];
    flags[1] = theta[1] < 1e-14; // alpha0 ~ 0
    flags[2] = theta[2] < 1e-14; // alpha1 ~ 0
    flags[3] = theta[3] < 1e-8 || theta[3] > 1.0 - 1e-8;
    if packing.model.has_k() && packing.model.has_alpha() {
        let idx = if packing.model.has_gamma() { 5 } else { 4 };
        flags[idx] = (theta[idx] - theta[idx + 1] * theta[idx + 1]).abs() < 1e-10;
    }
    flags
}

/// Standard errors from the inverse finite-difference observed information,
/// computed in the natural parametrization.
fn standard_errors(
    packing: &Packing,
    theta: &[f64],
    returns: &[f64],
    rule: &GaussLaguerre,
    cfg: &EstimationConfig,
    v1: f64,
) -> Vec<f64> {
    let dim = packing.dim();
    let floor_ln = cfg.density_floor.ln();
    let ll_at = |t: &[f64]| -> f64 {
        let params = packing.to_params(t, cfg.rate, v1);
        if params.alpha0 < 0.0 || params.alpha1 < 0.0 || !(0.0..1.0).contains(&params.beta1) {
            return f64::NAN;
        }
        let kernel = match innovation_kernel(params.innovation, rule) {
            Ok(k) => k,
            Err(_) => return f64::NAN,
        };
        filter_loglik(&params, returns, kernel.as_ref(), cfg.asymmetry, floor_ln).0
    };

    // absolute step floors matched to each parameter's scale
    let floors: Vec<f64> = (0..dim)
        .map(|i| match packing.model.param_names()[i] {
            "lambda" => 1e-4,
            "alpha0" | "alpha1" => 1e-10,
            "beta1" => 1e-5,
            "gamma" => 1e-2,
            _ => 1e-4,
        })
        .collect();
    let steps: Vec<f64> = theta
        .iter()
        .zip(&floors)
        .map(|(&t, &f)| (t.abs() * 1e-3).max(f))
        .collect();

    let mut hessian = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let base = ll_at(theta);
    for i in 0..dim {
        for j in i..dim {
            let mut t = theta.to_vec();
            let value = if i == j {
                t[i] = theta[i] + steps[i];
                let up = ll_at(&t);
                t[i] = theta[i] - steps[i];
                let dn = ll_at(&t);
                (up - 2.0 * base + dn) / (steps[i] * steps[i])
            } else {
                t[i] = theta[i] + steps[i];
                t[j] = theta[j] + steps[j];
                let pp = ll_at(&t);
                t[j] = theta[j] - steps[j];
                let pm = ll_at(&t);
                t[i] = theta[i] - steps[i];
                t[j] = theta[j] + steps[j];
                let mp = ll_at(&t);
                t[j] = theta[j] - steps[j];
                let mm = ll_at(&t);
                (pp - pm - mp + mm) / (4.0 * steps[i] * steps[j])
            };
            hessian[(i, j)] = value;
            hessian[(j, i)] = value;
        }
    }
    let information = -hessian;
    match information.try_inverse() {
        Some(cov) => (0..dim)
            .map(|i| {
                let d = cov[(i, i)];
                if d > 0.0 {
                    d.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect(),
        None => vec![f64::NAN; dim],
    }
}

/// Likelihood-ratio test outcome.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LrTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// `2(logL_full - logL_restricted)` against the chi-square upper tail.
pub fn lr_test(logl_restricted: f64, logl_full: f64, df: u32) -> Result<LrTest> {
    if df == 0 {
        return Err(DvgError::InvalidParameter {
            name: "df",
            value: 0.0,
            constraint: "must be >= 1",
        });
    }
    let statistic = 2.0 * (logl_full - logl_restricted);
    if statistic < -1e-9 {
        return Err(DvgError::NegativeLrStatistic { statistic });
    }
    let statistic = statistic.max(0.0);
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        gamma_ur(df as f64 / 2.0, statistic / 2.0)
    };
    Ok(LrTest { statistic, p_value })
}

/// Convenience wrapper over fitted results.
pub fn lr_test_fits(restricted: &FitResult, full: &FitResult, df: u32) -> Result<LrTest> {
    lr_test(restricted.log_likelihood, full.log_likelihood, df)
}
