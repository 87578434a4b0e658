//! European option pricing under the risk-neutral dynamics.
//!
//! Semianalytical route: two-probability Fourier inversion of the terminal
//! m.g.f., `call = S·P₁ - K·e^{-rT}·P₂` with
//! `P_j = 1/2 + (1/π)∫₀^∞ Re[e^{-iu·lnK} f_j(u)/(iu)] du`, where
//! `f₂(u) = φ(iu)` and `f₁(u) = φ(1+iu)/φ(1)`. Monte Carlo route with
//! normal-approximation confidence intervals validates it.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::charfn::{terminal_mgf, AffineGarchModel};
use crate::dynamics::{step_state, QParams};
use crate::error::{DvgError, Result};
use crate::integrate::kronrod_adaptive;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// A single European pricing problem.
#[derive(Debug, Clone)]
pub struct PricingRequest {
    pub spot: f64,
    pub strike: f64,
    /// Periods to maturity.
    pub steps: usize,
    /// Per-period risk-free log-rate (also baked into `model.r`).
    pub rate: f64,
    pub model: QParams,
    pub kind: OptionKind,
}

impl PricingRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(DvgError::InvalidParameter {
                name: "spot",
                value: self.spot,
                constraint: "must be > 0",
            });
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(DvgError::InvalidParameter {
                name: "strike",
                value: self.strike,
                constraint: "must be > 0",
            });
        }
        if self.steps == 0 {
            return Err(DvgError::InvalidParameter {
                name: "steps",
                value: 0.0,
                constraint: "must be >= 1",
            });
        }
        Ok(())
    }
}

/// Inversion-integral controls.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationConfig {
    /// Initial truncation point of the frequency integral.
    pub u_max: f64,
    /// Absolute tolerance handed to the adaptive panels.
    pub tol: f64,
    /// Tail threshold: the integral is extended in octaves until one
    /// contributes less than this.
    pub tail_tol: f64,
    /// Cap on the number of octave extensions.
    pub max_extensions: u32,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            u_max: 200.0,
            tol: 1e-9,
            tail_tol: 1e-10,
            max_extensions: 16,
        }
    }
}

/// Monte Carlo price with its sampling error.
#[derive(Debug, Clone, Copy)]
pub struct McResult {
    pub price: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_paths: usize,
}

/// Prices a European option from any terminal m.g.f. `φ(c) = E[S_T^c]`.
pub(crate) fn price_european_cf<F>(
    phi: F,
    spot: f64,
    strike: f64,
    steps: usize,
    rate: f64,
    kind: OptionKind,
    grid: &IntegrationConfig,
) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let ln_k = strike.ln();
    let phi_one = phi(Complex64::new(1.0, 0.0))?;
    let i = Complex64::new(0.0, 1.0);

    let integral = |shifted: bool| -> Result<f64> {
        let mut integrand = |u: f64| -> Result<f64> {
            let iu = i * u;
            let f = if shifted {
                phi(Complex64::new(1.0, u))? / phi_one
            } else {
                phi(iu)?
            };
            Ok(((-iu * ln_k).exp() * f / iu).re)
        };
        let mut total = kronrod_adaptive(&mut integrand, 0.0, grid.u_max, grid.tol)?;
        // extend in octaves; polynomially decaying tails shrink geometrically
        // per octave, so bound the remainder by the observed ratio
        let mut lo = grid.u_max;
        let mut extensions = 0;
        let mut prev_piece = f64::INFINITY;
        loop {
            let piece = kronrod_adaptive(&mut integrand, lo, 2.0 * lo, grid.tol)?;
            total += piece;
            if piece.abs() < grid.tail_tol {
                break;
            }
            let ratio = piece.abs() / prev_piece.abs();
            if ratio < 0.9 {
                let remaining_bound = piece.abs() * ratio / (1.0 - ratio);
                if remaining_bound < grid.tail_tol.max(1e-9 * total.abs()) {
                    break;
                }
            }
            extensions += 1;
            if extensions > grid.max_extensions {
                return Err(DvgError::Integration {
                    reason: format!(
                        "tail of the inversion integral still contributes {piece:.2e} \
                         beyond u = {:.1e} after {} extensions",
                        2.0 * lo,
                        extensions
                    ),
                });
            }
            prev_piece = piece;
            lo *= 2.0;
        }
        Ok(total)
    };

    let p1 = 0.5 + integral(true)? / std::f64::consts::PI;
    let p2 = 0.5 + integral(false)? / std::f64::consts::PI;
    let discount = (-rate * steps as f64).exp();
    let call = spot * p1 - strike * discount * p2;
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - spot + strike * discount,
    })
}

/// Semianalytical price by Fourier inversion of the recursive m.g.f.
pub fn price_fourier(req: &PricingRequest, grid: &IntegrationConfig) -> Result<f64> {
    req.validate()?;
    let model = AffineGarchModel::from(&req.model);
    price_european_cf(
        |c| terminal_mgf(&model, req.spot, req.model.h1, req.steps, c),
        req.spot,
        req.strike,
        req.steps,
        req.rate,
        req.kind,
        grid,
    )
}

/// Simulates terminal log-returns `ln(S_T/S_t)` under the risk-neutral
/// dynamics, one independent sub-stream per path.
pub fn simulate_terminal_q(q: &QParams, steps: usize, n_paths: usize, seed: u64) -> Vec<f64> {
    let lambda = q.lambda_q();
    (0..n_paths)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            let mut h = q.h1;
            let mut x = 0.0;
            for _ in 0..steps {
                let shape = (q.a * h).max(1e-300);
                let v: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                x += q.r + lambda * v + q.sigma_q * v.sqrt() * z;
                h = step_state(q.alpha0, q.alpha1, q.beta1, h, v);
            }
            x
        })
        .collect()
}

/// Discounted payoff statistics for one strike over a set of simulated
/// terminal log-returns.
pub fn mc_from_terminals(
    terminals: &[f64],
    spot: f64,
    strike: f64,
    steps: usize,
    rate: f64,
    kind: OptionKind,
) -> McResult {
    let discount = (-rate * steps as f64).exp();
    let n = terminals.len();
    let payoffs: Vec<f64> = terminals
        .iter()
        .map(|&x| {
            let s_t = spot * x.exp();
            let intrinsic = match kind {
                OptionKind::Call => (s_t - strike).max(0.0),
                OptionKind::Put => (strike - s_t).max(0.0),
            };
            discount * intrinsic
        })
        .collect();
    let mean = payoffs.iter().sum::<f64>() / n as f64;
    let var = payoffs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    McResult {
        price: mean,
        std_error: se,
        ci_low: mean - 1.96 * se,
        ci_high: mean + 1.96 * se,
        n_paths: n,
    }
}

/// Monte Carlo price with a 95% normal-approximation confidence interval.
pub fn price_mc(req: &PricingRequest, n_paths: usize, seed: u64) -> Result<McResult> {
    req.validate()?;
    if n_paths < 100 {
        return Err(DvgError::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            constraint: "must be >= 100",
        });
    }
    let terminals = simulate_terminal_q(&req.model, req.steps, n_paths, seed);
    Ok(mc_from_terminals(
        &terminals, req.spot, req.strike, req.steps, req.rate, req.kind,
    ))
}

/// Fixed composite-Kronrod frequency grid for pricing many strikes of one
/// maturity against a shared characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct BatchIntegration {
    pub u_max: f64,
    pub panels: usize,
}

impl Default for BatchIntegration {
    fn default() -> Self {
        BatchIntegration { u_max: 150.0, panels: 16 }
    }
}

/// Prices European calls sharing one maturity and rate from the spot-free
/// m.g.f. `g(c) = E[(S_T/S_t)^c]`. Mathematically identical to
/// [`price_fourier`] (same two-probability inversion), but the frequency
/// integral is evaluated on a fixed composite Kronrod grid so the expensive
/// recursion is shared across strikes.
pub fn price_calls_batch<G>(
    g: G,
    steps: usize,
    rate: f64,
    spots_strikes: &[(f64, f64)],
    cfg: &BatchIntegration,
) -> Result<Vec<f64>>
where
    G: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let grid = crate::integrate::kronrod_grid(0.0, cfg.u_max, cfg.panels);
    let g_one = g(Complex64::new(1.0, 0.0))?;
    let evaluations: Vec<(f64, f64, Complex64, Complex64)> = grid
        .par_iter()
        .map(|&(u, w)| {
            let g2 = g(Complex64::new(0.0, u))?;
            let g1 = g(Complex64::new(1.0, u))? / g_one;
            Ok((u, w, g1, g2))
        })
        .collect::<Result<_>>()?;

    let discount = (-rate * steps as f64).exp();
    Ok(spots_strikes
        .iter()
        .map(|&(spot, strike)| {
            let x = (spot / strike).ln();
            let mut acc1 = 0.0;
            let mut acc2 = 0.0;
            for &(u, w, g1, g2) in &evaluations {
                let osc = (Complex64::new(0.0, 1.0) * u * x).exp();
                let iu = Complex64::new(0.0, u);
                acc1 += w * (osc * g1 / iu).re;
                acc2 += w * (osc * g2 / iu).re;
            }
            let p1 = 0.5 + acc1 / std::f64::consts::PI;
            let p2 = 0.5 + acc2 / std::f64::consts::PI;
            spot * p1 - strike * discount * p2
        })
        .collect())
}

/// Uniform grid controls for the density inversion.
#[derive(Debug, Clone, Copy)]
pub struct DensityGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub u_max: f64,
    pub n_u: usize,
}

impl DensityGrid {
    /// Sizes the grid from the first-moment recursion of the state: the
    /// log-return mean and an upper proxy of its standard deviation.
    pub fn auto(model: &AffineGarchModel, h1: f64, horizon: usize) -> Self {
        let mut eh = h1;
        let mut mean = 0.0;
        let mut var = 0.0;
        for _ in 0..horizon {
            mean += model.r + (model.lambda * model.a + model.state_drift) * eh;
            var += (model.sigma * model.sigma + model.lambda * model.lambda) * model.a * eh;
            eh = model.alpha0 + (model.alpha1 * model.a + model.beta1) * eh;
        }
        let sd = var.sqrt().max(1e-8) * 1.3;
        let half_width = 12.0 * sd;
        let u_max = (48.0 / sd).max(50.0);
        DensityGrid {
            x_min: mean - half_width,
            x_max: mean + half_width,
            n_x: 801,
            u_max,
            n_u: 4096,
        }
    }
}

/// Density of the terminal log-return `x = ln(S_T/S_t)` by Fourier inversion
/// of the characteristic function `ψ(u) = φ(iu)/S^{iu}` onto a uniform grid.
///
/// Returns `(x, f(x))` pairs. Fails with a refinement demand when negative
/// lobes beyond `1e-4` appear, which signals an undersized grid.
pub fn density_inversion(
    model: &AffineGarchModel,
    h1: f64,
    horizon: usize,
    grid: &DensityGrid,
) -> Result<Vec<(f64, f64)>> {
    if horizon == 0 {
        return Err(DvgError::InvalidParameter {
            name: "horizon",
            value: 0.0,
            constraint: "must be >= 1",
        });
    }
    let mut u_max = grid.u_max;
    let mut n_u = grid.n_u;
    // extend the frequency range until the characteristic function has decayed
    for _ in 0..12 {
        let tail = terminal_mgf(model, 1.0, h1, horizon, Complex64::new(0.0, u_max))?;
        if tail.norm() < 1e-10 {
            break;
        }
        u_max *= 2.0;
        n_u *= 2;
    }
    let du = u_max / n_u as f64;
    let psi: Vec<Complex64> = (0..=n_u)
        .into_par_iter()
        .map(|k| {
            let u = k as f64 * du;
            terminal_mgf(model, 1.0, h1, horizon, Complex64::new(0.0, u))
        })
        .collect::<Result<_>>()?;

    let dx = (grid.x_max - grid.x_min) / (grid.n_x - 1) as f64;
    let out: Vec<(f64, f64)> = (0..grid.n_x)
        .into_par_iter()
        .map(|j| {
            let x = grid.x_min + j as f64 * dx;
            // trapezoid in u; the endpoints carry half weight
            let mut acc = 0.5 * psi[0].re; // e^{0}·ψ(0), ψ(0) = 1
            for (k, p) in psi.iter().enumerate().skip(1) {
                let u = k as f64 * du;
                let w = if k == n_u { 0.5 } else { 1.0 };
                acc += w * ((-Complex64::new(0.0, 1.0) * u * x).exp() * p).re;
            }
            (x, acc * du / std::f64::consts::PI)
        })
        .collect();

    let worst = out.iter().map(|&(_, f)| f).fold(f64::INFINITY, f64::min);
    if worst < -1e-4 {
        return Err(DvgError::GridRefinement {
            reason: format!("negative density lobe {worst:.2e}; increase u_max or the x-range"),
        });
    }
    Ok(out)
}
