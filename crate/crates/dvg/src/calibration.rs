//! Calibration of risk-neutral model parameters to option surfaces under
//! dollar and percentage RMSE losses.
//!
//! Four comparator models share the calibration harness:
//!
//! * `dvg` — the dynamic mixture model, free `(σ_Q, α₀, α₁, β₁)` with the
//!   variance identification `a = 1/(σ_Q² + λ_Q²)` and the initial state at
//!   its stationary mean.
//! * `vg-static` — `α₀ = α₁ = 0, β₁ = 1`, free `(σ_Q, a, h₁)`; the shape
//!   enters only through `a·h₁`, so the pair is reported as given.
//! * `gamma-garch` — `σ = 0` with pure-Gamma innovations. The Esscher drift
//!   tie `λ_Q = -σ_Q²/2` degenerates at σ = 0, so this comparator prices as
//!   an exact martingale through a per-state drift correction
//!   `κ = a·ln(1 - λ_Q)` with free `(λ_Q < 0, α₀, α₁, β₁)` and `a = 1/λ_Q²`.
//! * `hn` — the risk-neutral Gaussian affine-variance comparator
//!   `Y = r - h/2 + √h·Z`, `h' = ω + βh + α(Z - γ√h)²`, free `(ω, α, β, γ)`,
//!   priced by its own closed-form coefficient recursion.
//!
//! Losses are minimized in mean-square form (smooth at a perfect fit) and
//! reported as the corresponding root.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::charfn::{terminal_mgf, AffineGarchModel};
use crate::error::{DvgError, Result};
use crate::optim::{bfgs, nelder_mead, BfgsConfig, NelderMeadConfig};
use crate::pricing::{price_calls_batch, BatchIntegration};

/// One market option record (European call mid quote).
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    /// Quote date, ISO `YYYY-MM-DD` so that lexicographic order is temporal.
    pub quote_date: String,
    pub expiry: String,
    pub steps: u32,
    pub strike: f64,
    pub mid: f64,
    pub spot: f64,
    /// Per-step risk-free log-rate.
    pub rate: f64,
    /// Per-step dividend yield; pricing uses the adjusted spot
    /// `S·e^{-q·steps}`.
    pub div_yield: f64,
}

impl OptionQuote {
    pub fn forward_spot(&self) -> f64 {
        self.spot * (-self.div_yield * self.steps as f64).exp()
    }

    /// Static bounds for a call on the dividend-adjusted spot.
    pub fn arbitrage_bounds(&self) -> (f64, f64) {
        let s = self.forward_spot();
        let disc_k = self.strike * (-self.rate * self.steps as f64).exp();
        ((s - disc_k).max(0.0), s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    DollarRmse,
    PctRmse,
}

impl std::str::FromStr for LossKind {
    type Err = DvgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dollar-rmse" | "dollar" => Ok(LossKind::DollarRmse),
            "pct-rmse" | "pct" => Ok(LossKind::PctRmse),
            _ => Err(DvgError::InvalidParameter {
                name: "loss",
                value: f64::NAN,
                constraint: "expected dollar-rmse or pct-rmse",
            }),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::DollarRmse => "dollar-rmse",
            LossKind::PctRmse => "pct-rmse",
        })
    }
}

/// Root mean squared pricing error, in price units or relative to the market.
pub fn loss(kind: LossKind, theo: &[f64], market: &[f64]) -> Result<f64> {
    if theo.len() != market.len() || theo.is_empty() {
        return Err(DvgError::NotEnoughData(
            "loss needs equal-length, non-empty price vectors".into(),
        ));
    }
    let mut acc = 0.0;
    for (&t, &m) in theo.iter().zip(market) {
        let e = match kind {
            LossKind::DollarRmse => t - m,
            LossKind::PctRmse => {
                if m <= 0.0 {
                    return Err(DvgError::InvalidParameter {
                        name: "market price",
                        value: m,
                        constraint: "must be > 0 for the percentage loss",
                    });
                }
                (t - m) / m
            }
        };
        acc += e * e;
    }
    Ok((acc / theo.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibModel {
    Dvg,
    Hn,
    VgStatic,
    GammaGarch,
}

impl CalibModel {
    pub fn name(&self) -> &'static str {
        match self {
            CalibModel::Dvg => "dvg",
            CalibModel::Hn => "hn",
            CalibModel::VgStatic => "vg-static",
            CalibModel::GammaGarch => "gamma-garch",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            CalibModel::Dvg => &["sigma_q", "alpha0", "alpha1", "beta1"],
            CalibModel::Hn => &["omega", "alpha", "beta", "gamma"],
            CalibModel::VgStatic => &["sigma_q", "a", "h1"],
            CalibModel::GammaGarch => &["lambda_q", "alpha0", "alpha1", "beta1"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }
}

impl std::str::FromStr for CalibModel {
    type Err = DvgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dvg" => Ok(CalibModel::Dvg),
            "hn" => Ok(CalibModel::Hn),
            "vg-static" | "vg" => Ok(CalibModel::VgStatic),
            "gamma-garch" | "gg" => Ok(CalibModel::GammaGarch),
            _ => Err(DvgError::InvalidParameter {
                name: "model",
                value: f64::NAN,
                constraint: "expected dvg, hn, vg-static or gamma-garch",
            }),
        }
    }
}

const MAX_PERSISTENCE: f64 = 0.995;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Bound-free coordinates <-> natural parameters. Positivity and the
/// first-moment stationarity `α₁·a + β₁ < 1` hold by construction: the
/// persistence `p` and its split `m` between the innovation and inertia
/// terms are logistic-transformed.
fn unpack(model: CalibModel, x: &[f64]) -> Vec<f64> {
    match model {
        CalibModel::Dvg => {
            let sigma = x[0].exp();
            let lq = -sigma * sigma / 2.0;
            let a = 1.0 / (sigma * sigma + lq * lq);
            let alpha0 = x[1].exp();
            let p = MAX_PERSISTENCE * sigmoid(x[2]);
            let m = sigmoid(x[3]);
            vec![sigma, alpha0, p * m / a, p * (1.0 - m)]
        }
        CalibModel::GammaGarch => {
            let lambda = -x[0].exp();
            let a = 1.0 / (lambda * lambda);
            let alpha0 = x[1].exp();
            let p = MAX_PERSISTENCE * sigmoid(x[2]);
            let m = sigmoid(x[3]);
            vec![lambda, alpha0, p * m / a, p * (1.0 - m)]
        }
        CalibModel::VgStatic => vec![x[0].exp(), x[1].exp(), x[2].exp()],
        CalibModel::Hn => {
            let omega = x[0].exp();
            let alpha = x[1].exp();
            let p = MAX_PERSISTENCE * sigmoid(x[2]);
            let m = sigmoid(x[3]);
            let gamma = (p * m / alpha).sqrt();
            vec![omega, alpha, p * (1.0 - m), gamma]
        }
    }
}

fn pack(model: CalibModel, natural: &[f64]) -> Vec<f64> {
    match model {
        CalibModel::Dvg => {
            let sigma = natural[0];
            let lq = -sigma * sigma / 2.0;
            let a = 1.0 / (sigma * sigma + lq * lq);
            let p = (natural[2] * a + natural[3]).min(MAX_PERSISTENCE - 1e-9);
            let m = if p > 0.0 { natural[2] * a / p } else { 0.5 };
            vec![
                sigma.ln(),
                natural[1].max(1e-300).ln(),
                logit(p / MAX_PERSISTENCE),
                logit(m),
            ]
        }
        CalibModel::GammaGarch => {
            let lambda = natural[0];
            let a = 1.0 / (lambda * lambda);
            let p = (natural[2] * a + natural[3]).min(MAX_PERSISTENCE - 1e-9);
            let m = if p > 0.0 { natural[2] * a / p } else { 0.5 };
            vec![
                (-lambda).max(1e-300).ln(),
                natural[1].max(1e-300).ln(),
                logit(p / MAX_PERSISTENCE),
                logit(m),
            ]
        }
        CalibModel::VgStatic => natural.iter().map(|v| v.max(1e-300).ln()).collect(),
        CalibModel::Hn => {
            let (omega, alpha, beta, gamma) = (natural[0], natural[1], natural[2], natural[3]);
            let p = (beta + alpha * gamma * gamma).min(MAX_PERSISTENCE - 1e-9);
            let m = if p > 0.0 { alpha * gamma * gamma / p } else { 0.5 };
            vec![
                omega.max(1e-300).ln(),
                alpha.max(1e-300).ln(),
                logit(p / MAX_PERSISTENCE),
                logit(m),
            ]
        }
    }
}

/// Spot-free terminal m.g.f. `g(c) = E[(S_T/S_t)^c]` of each comparator for
/// one maturity/rate bucket.
fn spot_free_mgf(
    model: CalibModel,
    natural: &[f64],
    rate: f64,
    steps: usize,
    c: Complex64,
) -> Result<Complex64> {
    match model {
        CalibModel::Dvg => {
            let sigma = natural[0];
            let lq = -sigma * sigma / 2.0;
            let a = 1.0 / (sigma * sigma + lq * lq);
            let (alpha0, alpha1, beta1) = (natural[1], natural[2], natural[3]);
            let h1 = alpha0 / (1.0 - alpha1 * a - beta1);
            let m = AffineGarchModel {
                r: rate,
                lambda: lq,
                sigma,
                a,
                alpha0,
                alpha1,
                beta1,
                state_drift: 0.0,
            };
            terminal_mgf(&m, 1.0, h1, steps, c)
        }
        CalibModel::VgStatic => {
            let (sigma, a, h1) = (natural[0], natural[1], natural[2]);
            let lq = -sigma * sigma / 2.0;
            let m = AffineGarchModel {
                r: rate,
                lambda: lq,
                sigma,
                a,
                alpha0: 0.0,
                alpha1: 0.0,
                beta1: 1.0,
                state_drift: 0.0,
            };
            terminal_mgf(&m, 1.0, h1, steps, c)
        }
        CalibModel::GammaGarch => {
            let lambda = natural[0];
            let a = 1.0 / (lambda * lambda);
            let (alpha0, alpha1, beta1) = (natural[1], natural[2], natural[3]);
            let h1 = alpha0 / (1.0 - alpha1 * a - beta1);
            let m = AffineGarchModel {
                r: rate,
                lambda,
                sigma: 0.0,
                a,
                alpha0,
                alpha1,
                beta1,
                // exact one-step martingale in place of the (undefined) σ=0
                // Esscher tie
                state_drift: a * (1.0 - lambda).ln(),
            };
            terminal_mgf(&m, 1.0, h1, steps, c)
        }
        CalibModel::Hn => {
            let (omega, alpha, beta, gamma) = (natural[0], natural[1], natural[2], natural[3]);
            let h1 = (omega + alpha) / (1.0 - beta - alpha * gamma * gamma);
            hn_spot_free_mgf(omega, alpha, beta, gamma, rate, h1, steps, c)
        }
    }
}

/// Risk-neutral affine-Gaussian recursion:
/// `A(t) = A(t+1) + c·r + ω·B(t+1) - ln(1 - 2αB(t+1))/2`,
/// `B(t) = -c/2 + βB(t+1) + αγ²B(t+1) + (c - 2αγB(t+1))²/(2(1 - 2αB(t+1)))`.
#[allow(clippy::too_many_arguments)]
fn hn_spot_free_mgf(
    omega: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    rate: f64,
    h1: f64,
    steps: usize,
    c: Complex64,
) -> Result<Complex64> {
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    for step in 0..steps {
        let denom = Complex64::new(1.0, 0.0) - 2.0 * alpha * b;
        if denom.re <= 0.0 && denom.im.abs() <= 1e-12 * (1.0 + denom.re.abs()) {
            return Err(DvgError::BranchCut { step, arg: denom });
        }
        let b_next = -c / 2.0
            + beta * b
            + alpha * gamma * gamma * b
            + (c - 2.0 * alpha * gamma * b) * (c - 2.0 * alpha * gamma * b) / (2.0 * denom);
        a = a + c * rate + omega * b - 0.5 * denom.ln();
        b = b_next;
    }
    Ok((a + b * h1).exp())
}

/// Per-quote model price (call, dividend-adjusted spot).
pub fn price_quote(
    model: CalibModel,
    natural: &[f64],
    quote: &OptionQuote,
    grid: &BatchIntegration,
) -> Result<f64> {
    let prices = price_calls_batch(
        |c| spot_free_mgf(model, natural, quote.rate, quote.steps as usize, c),
        quote.steps as usize,
        quote.rate,
        &[(quote.forward_spot(), quote.strike)],
        grid,
    )?;
    Ok(prices[0])
}

fn price_all(
    model: CalibModel,
    natural: &[f64],
    quotes: &[OptionQuote],
    grid: &BatchIntegration,
) -> Result<Vec<f64>> {
    // group by (steps, rate) so each maturity runs the recursion once
    let mut buckets: Vec<(u32, f64, Vec<usize>)> = Vec::new();
    for (idx, q) in quotes.iter().enumerate() {
        match buckets
            .iter_mut()
            .find(|(s, r, _)| *s == q.steps && *r == q.rate)
        {
            Some((_, _, v)) => v.push(idx),
            None => buckets.push((q.steps, q.rate, vec![idx])),
        }
    }
    let mut out = vec![0.0; quotes.len()];
    for (steps, rate, idxs) in buckets {
        let pairs: Vec<(f64, f64)> = idxs
            .iter()
            .map(|&i| (quotes[i].forward_spot(), quotes[i].strike))
            .collect();
        let prices = price_calls_batch(
            |c| spot_free_mgf(model, natural, rate, steps as usize, c),
            steps as usize,
            rate,
            &pairs,
            grid,
        )?;
        for (&i, p) in idxs.iter().zip(prices) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Screens quotes: static no-arbitrage bounds and (optionally) a moneyness
/// window. Returns the kept quotes and `(index, reason)` for each rejection.
pub fn validate_quotes(
    quotes: &[OptionQuote],
    moneyness: Option<(f64, f64)>,
) -> (Vec<OptionQuote>, Vec<(usize, String)>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (idx, q) in quotes.iter().enumerate() {
        if q.steps == 0 || q.strike <= 0.0 || q.spot <= 0.0 || q.mid <= 0.0 {
            rejected.push((idx, "non-positive strike, spot, mid or steps".to_string()));
            continue;
        }
        let (lo, hi) = q.arbitrage_bounds();
        if q.mid < lo - 1e-12 || q.mid > hi + 1e-12 {
            rejected.push((
                idx,
                format!("mid {} outside static bounds [{lo:.6}, {hi:.6}]", q.mid),
            ));
            continue;
        }
        if let Some((lo_m, hi_m)) = moneyness {
            let m = q.spot / q.strike;
            if m < lo_m || m > hi_m {
                rejected.push((idx, format!("moneyness {m:.4} outside [{lo_m}, {hi_m}]")));
                continue;
            }
        }
        kept.push(q.clone());
    }
    (kept, rejected)
}

/// Controls for [`calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub integration: BatchIntegration,
    /// Moneyness window applied before fitting; `None` disables the filter.
    pub moneyness: Option<(f64, f64)>,
    /// Warm start in natural coordinates.
    pub start: Option<Vec<f64>>,
    pub max_bfgs_iters: usize,
    pub max_nm_evals: usize,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            integration: BatchIntegration::default(),
            moneyness: Some((0.975, 1.025)),
            start: None,
            max_bfgs_iters: 120,
            max_nm_evals: 1500,
            n_restarts: 1,
            seed: 7,
        }
    }
}

/// One calibrated quote.
#[derive(Debug, Clone, Copy)]
pub struct QuoteFit {
    pub theo: f64,
    pub market: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub model: CalibModel,
    pub loss_kind: LossKind,
    pub param_names: Vec<&'static str>,
    pub params: Vec<f64>,
    pub loss: f64,
    pub fits: Vec<QuoteFit>,
    pub quotes_used: Vec<OptionQuote>,
    pub converged: bool,
    pub n_evals: usize,
}

impl CalibrationResult {
    /// Residuals `theo - market` in quote order.
    pub fn residuals(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.theo - f.market).collect()
    }
}

/// Transformed-coordinate starting point seeded by a crude at-the-money
/// vol proxy (Brenner-Subrahmanyam) so the variance state starts on scale.
fn default_start(model: CalibModel, quotes: &[OptionQuote]) -> Vec<f64> {
    let q = quotes
        .iter()
        .min_by(|a, b| {
            let da = (a.spot / a.strike - 1.0).abs();
            let db = (b.spot / b.strike - 1.0).abs();
            da.partial_cmp(&db).unwrap()
        })
        .expect("non-empty quotes");
    let total_sd = (q.mid / q.spot * 2.5).max(1e-4);
    let v_step = (total_sd * total_sd / q.steps as f64).max(1e-10);
    let (p0, m0) = (0.7, 0.3);
    match model {
        CalibModel::Dvg => vec![
            v_step.sqrt().max(0.01).ln(),
            (v_step * (1.0 - p0)).ln(),
            logit(p0 / MAX_PERSISTENCE),
            logit(m0),
        ],
        CalibModel::VgStatic => {
            let sigma = v_step.sqrt().max(0.01);
            let lq = -sigma * sigma / 2.0;
            let a = 1.0 / (sigma * sigma + lq * lq);
            pack(model, &[sigma, a, v_step])
        }
        CalibModel::GammaGarch => vec![
            v_step.sqrt().max(0.005).ln(),
            (v_step * (1.0 - p0)).ln(),
            logit(p0 / MAX_PERSISTENCE),
            logit(m0),
        ],
        CalibModel::Hn => vec![
            (v_step * (1.0 - p0) * 0.5).ln(),
            (v_step * (1.0 - p0) * 0.5).ln(),
            logit(p0 / MAX_PERSISTENCE),
            logit(m0),
        ],
    }
}

/// Calibrates one model to one day of quotes.
pub fn calibrate(
    quotes: &[OptionQuote],
    model: CalibModel,
    loss_kind: LossKind,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    let (kept, _rejected) = validate_quotes(quotes, cfg.moneyness);
    if kept.len() < 5 {
        return Err(DvgError::NotEnoughData(format!(
            "{} usable quotes after screening; need at least 5",
            kept.len()
        )));
    }
    let market: Vec<f64> = kept.iter().map(|q| q.mid).collect();
    let grid = cfg.integration;

    // mean-square objective (smooth at zero loss), with arbitrage-bound
    // excursions penalized so the optimizer stays on priceable territory
    let objective = |x: &[f64]| -> f64 {
        let natural = unpack(model, x);
        let theo = match price_all(model, &natural, &kept, &grid) {
            Ok(p) => p,
            Err(_) => return 1e6,
        };
        let mut acc = 0.0;
        let mut penalty = 0.0;
        for ((&t, &m), q) in theo.iter().zip(&market).zip(&kept) {
            if !t.is_finite() {
                return 1e6;
            }
            let (lo, hi) = q.arbitrage_bounds();
            if t < lo - 1e-9 {
                penalty += (lo - t) * (lo - t);
            }
            if t > hi + 1e-9 {
                penalty += (t - hi) * (t - hi);
            }
            let e = match loss_kind {
                LossKind::DollarRmse => t - m,
                LossKind::PctRmse => (t - m) / m,
            };
            acc += e * e;
        }
        acc / theo.len() as f64 + 1e4 * penalty
    };

    let x0 = match &cfg.start {
        Some(natural) => pack(model, natural),
        None => default_start(model, &kept),
    };

    let bfgs_cfg = BfgsConfig {
        max_iters: cfg.max_bfgs_iters,
        grad_tol: 1e-10,
        fd_step: 1e-6,
    };
    let mut best = bfgs(objective, &x0, &bfgs_cfg);
    let mut total_evals = best.n_evals;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.n_restarts {
        let mut start = x0.clone();
        for v in start.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += 0.5 * z;
        }
        let run = bfgs(objective, &start, &bfgs_cfg);
        total_evals += run.n_evals;
        if run.f < best.f {
            best = run;
        }
    }

    // simplex polish smooths over finite-difference noise near the optimum
    let polish = nelder_mead(
        objective,
        &best.x,
        &vec![0.05; best.x.len()],
        &NelderMeadConfig {
            max_evals: cfg.max_nm_evals,
            f_tol: 1e-14,
            x_tol: 1e-10,
        },
    );
    total_evals += polish.n_evals;
    let converged = best.converged || polish.converged;
    if polish.f < best.f {
        best = polish;
    }

    let natural = unpack(model, &best.x);
    let theo = price_all(model, &natural, &kept, &grid)?;
    let fits: Vec<QuoteFit> = theo
        .iter()
        .zip(&market)
        .map(|(&t, &m)| QuoteFit { theo: t, market: m })
        .collect();
    let loss_value = loss(loss_kind, &theo, &market)?;

    Ok(CalibrationResult {
        model,
        loss_kind,
        param_names: model.param_names().to_vec(),
        params: natural,
        loss: loss_value,
        fits,
        quotes_used: kept,
        converged,
        n_evals: total_evals,
    })
}

/// One day's calibration inside a batch run.
#[derive(Debug, Clone)]
pub struct DailyCalibration {
    pub date: String,
    pub result: CalibrationResult,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub days: Vec<DailyCalibration>,
    pub warnings: Vec<String>,
}

/// Calibrates each model day by day, warm-starting every day from the
/// previous day's optimum of the same model. Days with fewer than five
/// usable quotes are skipped with a warning.
pub fn batch_calibrate(
    quotes: &[OptionQuote],
    models: &[CalibModel],
    loss_kind: LossKind,
    cfg: &CalibrationConfig,
) -> Result<BatchOutcome> {
    let mut by_date: Vec<(String, Vec<OptionQuote>)> = Vec::new();
    for q in quotes {
        match by_date.iter_mut().find(|(d, _)| *d == q.quote_date) {
            Some((_, v)) => v.push(q.clone()),
            None => by_date.push((q.quote_date.clone(), vec![q.clone()])),
        }
    }
    by_date.sort_by(|a, b| a.0.cmp(&b.0));

    let mut days = Vec::new();
    let mut warnings = Vec::new();
    for model in models {
        let mut warm: Option<Vec<f64>> = None;
        for (date, day_quotes) in &by_date {
            let day_cfg = CalibrationConfig {
                start: warm.clone().or_else(|| cfg.start.clone()),
                ..cfg.clone()
            };
            match calibrate(day_quotes, *model, loss_kind, &day_cfg) {
                Ok(result) => {
                    warm = Some(result.params.clone());
                    days.push(DailyCalibration { date: date.clone(), result });
                }
                Err(DvgError::NotEnoughData(msg)) => {
                    warnings.push(format!("{date} [{}]: skipped: {msg}", model.name()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(BatchOutcome { days, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn synthetic_surface(natural: &[f64], model: CalibModel) -> Vec<OptionQuote> {
        let grid = BatchIntegration::default();
        let mut quotes = Vec::new();
        for &steps in &[10u32, 20, 30] {
            for &strike in &[0.95, 0.975, 1.0, 1.025, 1.05] {
                let mut q = OptionQuote {
                    quote_date: "2009-01-15".into(),
                    expiry: format!("2009-02-{:02}", steps),
                    steps,
                    strike,
                    mid: 0.0,
                    spot: 1.0,
                    rate: 0.0001,
                    div_yield: 0.0,
                };
                q.mid = price_quote(model, natural, &q, &grid).unwrap();
                quotes.push(q);
            }
        }
        quotes
    }

    #[test]
    fn loss_examples() {
        assert_eq!(
            loss(LossKind::DollarRmse, &[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
        let theo = [3.5, 4.5, 2.5];
        let mkt = [3.0, 4.0, 2.0];
        assert_abs_diff_eq!(
            loss(LossKind::DollarRmse, &theo, &mkt).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        // residuals {1,-1,1,-1} against prices {10,10,10,10}
        let theo = [11.0, 9.0, 11.0, 9.0];
        let mkt = [10.0, 10.0, 10.0, 10.0];
        assert_abs_diff_eq!(loss(LossKind::DollarRmse, &theo, &mkt).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(loss(LossKind::PctRmse, &theo, &mkt).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn loss_rejects_mismatched_or_nonpositive() {
        assert!(loss(LossKind::DollarRmse, &[1.0], &[1.0, 2.0]).is_err());
        assert!(loss(LossKind::PctRmse, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn transforms_round_trip() {
        for model in [
            CalibModel::Dvg,
            CalibModel::Hn,
            CalibModel::VgStatic,
            CalibModel::GammaGarch,
        ] {
            let natural = match model {
                CalibModel::Dvg => vec![0.1, 0.002, 0.003, 0.4],
                CalibModel::Hn => vec![1e-6, 2e-6, 0.5, 150.0],
                CalibModel::VgStatic => vec![0.1, 90.0, 0.001],
                CalibModel::GammaGarch => vec![-0.08, 0.002, 0.003, 0.4],
            };
            let back = unpack(model, &pack(model, &natural));
            for (a, b) in natural.iter().zip(&back) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn every_comparator_prices_as_a_martingale() {
        // g(1) must equal e^{rT} for all four models
        let rate = 0.0002;
        let steps = 25;
        let cases: Vec<(CalibModel, Vec<f64>)> = vec![
            (CalibModel::Dvg, vec![0.1, 0.002, 0.003, 0.4]),
            (CalibModel::VgStatic, vec![0.12, 80.0, 0.0012]),
            (CalibModel::GammaGarch, vec![-0.06, 0.001, 0.004, 0.3]),
            (CalibModel::Hn, vec![1e-6, 2e-6, 0.5, 150.0]),
        ];
        for (model, natural) in cases {
            let g1 = spot_free_mgf(model, &natural, rate, steps, Complex64::new(1.0, 0.0))
                .unwrap();
            let expected = (rate * steps as f64).exp();
            assert_relative_eq!(g1.re, expected, max_relative = 1e-10);
            assert_abs_diff_eq!(g1.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dvg_batch_price_matches_adaptive_fourier() {
        use crate::dynamics::QParams;
        use crate::pricing::{price_fourier, IntegrationConfig, OptionKind, PricingRequest};

        let natural = vec![0.1, 0.002, 0.003, 0.4];
        let sigma: f64 = natural[0];
        let lq = -sigma * sigma / 2.0;
        let a = 1.0 / (sigma * sigma + lq * lq);
        let h1 = natural[1] / (1.0 - natural[2] * a - natural[3]);
        let q = OptionQuote {
            quote_date: "2009-01-15".into(),
            expiry: "2009-02-15".into(),
            steps: 21,
            strike: 0.98,
            mid: 0.0,
            spot: 1.0,
            rate: 0.0001,
            div_yield: 0.0,
        };
        let batch = price_quote(CalibModel::Dvg, &natural, &q, &BatchIntegration::default())
            .unwrap();
        let req = PricingRequest {
            spot: 1.0,
            strike: 0.98,
            steps: 21,
            rate: 0.0001,
            model: QParams::new(0.0001, sigma, a, natural[1], natural[2], natural[3], h1)
                .unwrap(),
            kind: OptionKind::Call,
        };
        let adaptive = price_fourier(&req, &IntegrationConfig::default()).unwrap();
        assert_abs_diff_eq!(batch, adaptive, epsilon = 1e-6);
    }

    #[test]
    fn dividend_yield_shifts_the_forward() {
        let natural = vec![0.1, 0.002, 0.003, 0.4];
        let base = OptionQuote {
            quote_date: "d".into(),
            expiry: "e".into(),
            steps: 20,
            strike: 1.0,
            mid: 0.1,
            spot: 1.0,
            rate: 0.0,
            div_yield: 0.0,
        };
        let with_div = OptionQuote { div_yield: 0.001, ..base.clone() };
        let grid = BatchIntegration::default();
        let p0 = price_quote(CalibModel::Dvg, &natural, &base, &grid).unwrap();
        let p1 = price_quote(CalibModel::Dvg, &natural, &with_div, &grid).unwrap();
        assert!(p1 < p0, "dividends must lower the call: {p1} vs {p0}");
    }

    #[test]
    fn quote_screening_flags_violations() {
        let good = OptionQuote {
            quote_date: "2009-01-15".into(),
            expiry: "x".into(),
            steps: 20,
            strike: 1.0,
            mid: 0.05,
            spot: 1.0,
            rate: 0.0,
            div_yield: 0.0,
        };
        let above_spot = OptionQuote { mid: 1.2, ..good.clone() };
        let below_intrinsic = OptionQuote { strike: 0.5, mid: 0.1, ..good.clone() };
        let off_moneyness = OptionQuote { strike: 1.4, mid: 0.01, ..good.clone() };
        let (kept, rejected) = validate_quotes(
            &[good, above_spot, below_intrinsic, off_moneyness],
            Some((0.975, 1.025)),
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(rejected.len(), 3);
        assert!(rejected.iter().any(|(i, _)| *i == 1));
        assert!(rejected.iter().any(|(i, _)| *i == 2));
        assert!(rejected.iter().any(|(i, _)| *i == 3));
    }

    #[test]
    fn synthetic_surface_recovery() {
        let truth = vec![0.09, 0.0015, 0.002, 0.45];
        let quotes = synthetic_surface(&truth, CalibModel::Dvg);
        let start: Vec<f64> = truth.iter().map(|v| v * 1.12).collect();
        let cfg = CalibrationConfig {
            moneyness: None,
            start: Some(start),
            ..Default::default()
        };
        let result = calibrate(&quotes, CalibModel::Dvg, LossKind::DollarRmse, &cfg).unwrap();
        assert!(result.loss < 1e-4, "recovered loss {}", result.loss);
        // the recomputed loss from stored fits agrees with the stored value
        let theo: Vec<f64> = result.fits.iter().map(|f| f.theo).collect();
        let mkt: Vec<f64> = result.fits.iter().map(|f| f.market).collect();
        assert_abs_diff_eq!(
            result.loss,
            loss(result.loss_kind, &theo, &mkt).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn quote_order_does_not_change_the_objective() {
        let truth = vec![0.09, 0.0015, 0.002, 0.45];
        let mut quotes = synthetic_surface(&truth, CalibModel::Dvg);
        let cfg = CalibrationConfig {
            moneyness: None,
            start: Some(truth.iter().map(|v| v * 1.1).collect()),
            max_bfgs_iters: 25,
            n_restarts: 0,
            ..Default::default()
        };
        let a = calibrate(&quotes, CalibModel::Dvg, LossKind::DollarRmse, &cfg).unwrap();
        quotes.reverse();
        let b = calibrate(&quotes, CalibModel::Dvg, LossKind::DollarRmse, &cfg).unwrap();
        assert_abs_diff_eq!(a.loss, b.loss, epsilon = 1e-12);
        for (x, y) in a.params.iter().zip(&b.params) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn too_few_quotes_is_an_error() {
        let truth = vec![0.09, 0.0015, 0.002, 0.45];
        let quotes = synthetic_surface(&truth, CalibModel::Dvg);
        let few = &quotes[..4];
        assert!(matches!(
            calibrate(few, CalibModel::Dvg, LossKind::DollarRmse, &CalibrationConfig {
                moneyness: None,
                ..Default::default()
            }),
            Err(DvgError::NotEnoughData(_))
        ));
    }

    #[test]
    fn batch_single_day_degenerates_to_calibrate_and_reruns_identically() {
        let truth = vec![0.09, 0.0015, 0.002, 0.45];
        let quotes = synthetic_surface(&truth, CalibModel::Dvg);
        let cfg = CalibrationConfig {
            moneyness: None,
            start: Some(truth.iter().map(|v| v * 1.1).collect()),
            max_bfgs_iters: 25,
            n_restarts: 0,
            ..Default::default()
        };
        let single = calibrate(&quotes, CalibModel::Dvg, LossKind::DollarRmse, &cfg).unwrap();
        let batch1 =
            batch_calibrate(&quotes, &[CalibModel::Dvg], LossKind::DollarRmse, &cfg).unwrap();
        let batch2 =
            batch_calibrate(&quotes, &[CalibModel::Dvg], LossKind::DollarRmse, &cfg).unwrap();
        assert_eq!(batch1.days.len(), 1);
        assert!(batch1.warnings.is_empty());
        assert_abs_diff_eq!(batch1.days[0].result.loss, single.loss, epsilon = 1e-14);
        assert_eq!(batch1.days[0].result.params, batch2.days[0].result.params);
    }

    #[test]
    fn batch_skips_thin_days_with_warning() {
        let truth = vec![0.09, 0.0015, 0.002, 0.45];
        let mut quotes = synthetic_surface(&truth, CalibModel::Dvg);
        let mut thin = quotes[0].clone();
        thin.quote_date = "2009-01-16".into();
        quotes.push(thin);
        let cfg = CalibrationConfig {
            moneyness: None,
            start: Some(truth.clone()),
            max_bfgs_iters: 10,
            n_restarts: 0,
            ..Default::default()
        };
        let out =
            batch_calibrate(&quotes, &[CalibModel::Dvg], LossKind::DollarRmse, &cfg).unwrap();
        assert_eq!(out.days.len(), 1);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("2009-01-16"));
    }
}
