//! Gauss-Laguerre quadrature for integrals of the form `∫₀^∞ e^{-u} f(u) du`.
//!
//! Nodes are the roots of the Laguerre polynomial `L_n`, located by Newton
//! iteration on the three-term recurrence; weights follow
//! `w_i = x_i / ((n+1)² L_{n+1}²(x_i))`.

use crate::error::{DvgError, Result};

pub const MAX_ORDER: usize = 256;

/// An n-point Gauss-Laguerre rule. Exact for polynomials of degree ≤ 2n-1
/// against the weight `e^{-u}` on `[0, ∞)`; the weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Evaluates `L_n(x)` and `L_{n-1}(x)` with dynamic rescaling so that the
/// recurrence survives the large magnitudes reached for high orders. Returns
/// `(l_n, l_prev, log_scale)`: the true values are `l * e^{log_scale}`.
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 1.0; // L_0
    let mut cur = 1.0 - x; // L_1
    let mut log_scale = 0.0;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for k in 1..n {
        let next = ((2.0 * k as f64 + 1.0 - x) * cur - k as f64 * prev) / (k as f64 + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e130 {
            let shift = mag.ln();
            cur *= (-shift).exp();
            prev *= (-shift).exp();
            log_scale += shift;
        }
    }
    (cur, prev, log_scale)
}

impl GaussLaguerre {
    /// Builds the rule of the given order (1 ≤ n ≤ 256).
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(DvgError::InvalidParameter {
                name: "order",
                value: order as f64,
                constraint: "quadrature order must be in 1..=256",
            });
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];

        for i in 0..n {
            // standard starting guesses for the i-th smallest root
            let mut z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => nodes[0] + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = i as f64 - 1.0;
                    nodes[i - 1] + (1.0 + 2.55 * ai) / (1.9 * ai) * (nodes[i - 1] - nodes[i - 2])
                }
            };

            let mut converged = false;
            let mut last_step = f64::INFINITY;
            for _ in 0..200 {
                let (ln, lprev, _) = laguerre_scaled(n, z);
                // L_n'(x) = n (L_n(x) - L_{n-1}(x)) / x
                let deriv = nf * (ln - lprev) / z;
                let step = ln / deriv;
                z -= step;
                last_step = step.abs();
                if last_step <= 1e-14 * z.abs() {
                    converged = true;
                    break;
                }
            }
            // the iteration may dither at the rounding floor without meeting
            // the strict criterion; accept if it got essentially there
            if !converged && last_step <= 1e-12 * z.abs() {
                converged = true;
            }
            if !converged || !z.is_finite() || z <= 0.0 {
                return Err(DvgError::QuadratureConvergence { order: n, index: i });
            }
            nodes[i] = z;

            let (lnext, _, log_scale) = laguerre_scaled(n + 1, z);
            // w = x / ((n+1)^2 L_{n+1}^2(x)), evaluated in log space
            let log_w =
                z.ln() - 2.0 * (nf + 1.0).ln() - 2.0 * (lnext.abs().ln() + log_scale);
            weights[i] = log_w.exp();
        }

        Ok(GaussLaguerre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest node; the rule cannot resolve integrands whose mass lies beyond it.
    pub fn max_node(&self) -> f64 {
        *self.nodes.last().expect("order >= 1")
    }

    /// Approximates `∫₀^∞ e^{-u} f(u) du`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Plain two-column text table (node, weight), one pair per line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push_str(&format!("{:.16e} {:.16e}\n", x, w));
        }
        out
    }
}
