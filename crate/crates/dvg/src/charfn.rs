//! Recursive conditional m.g.f. of the terminal log-price.
//!
//! The conditional expectation `E_t[S_T^c]` is exponential-affine in the
//! state: `S_t^c · exp(A + B·h_{t+1})`, with `(A, B)` obtained by iterating
//!
//! ```text
//! A(t) = c·r + A(t+1) + α₀·B(t+1)
//! B(t) = c·κ + β₁·B(t+1) - a·Log[1 - (c·λ + α₁·B(t+1) + c²σ²/2)]
//! ```
//!
//! backwards from `A(T) = B(T) = 0`, using the principal complex logarithm
//! at every step. `κ` is an optional per-state deterministic drift (zero for
//! the plain historical and risk-neutral models); it lets the same recursion
//! cover drift-corrected martingale variants of the dynamics. The argument of
//! the logarithm is monitored and evaluation aborts if it reaches the branch
//! cut instead of silently wrapping the phase.

use num_complex::Complex64;

use crate::dynamics::{DvgParams, QParams};
use crate::error::{DvgError, Result};

/// One-period affine dynamics, the common input of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineGarchModel {
    pub r: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub a: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Deterministic return drift per unit of state, `Y_t = r + κ·h_t + …`.
    pub state_drift: f64,
}

impl From<&DvgParams> for AffineGarchModel {
    fn from(p: &DvgParams) -> Self {
        AffineGarchModel {
            r: p.r,
            lambda: p.lambda,
            sigma: p.sigma,
            a: p.a,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            beta1: p.beta1,
            state_drift: 0.0,
        }
    }
}

impl From<&QParams> for AffineGarchModel {
    fn from(q: &QParams) -> Self {
        AffineGarchModel {
            r: q.r,
            lambda: q.lambda_q(),
            sigma: q.sigma_q,
            a: q.a,
            alpha0: q.alpha0,
            alpha1: q.alpha1,
            beta1: q.beta1,
            state_drift: 0.0,
        }
    }
}

/// Coefficient sequence for one complex argument. `coeffs[s]` holds the pair
/// `(A, B)` valued `s` steps before maturity, so `coeffs[0] = (0, 0)` and the
/// last entry belongs to the evaluation date.
#[derive(Debug, Clone)]
pub struct CoefPath {
    pub c: Complex64,
    pub coeffs: Vec<(Complex64, Complex64)>,
}

impl CoefPath {
    /// The `(A, B)` pair at the evaluation date.
    pub fn at_valuation(&self) -> (Complex64, Complex64) {
        *self.coeffs.last().expect("at least the terminal pair")
    }

    /// Re-substitutes every stored pair into the recursion and returns the
    /// largest residual, for self-checks.
    pub fn max_recursion_residual(&self, model: &AffineGarchModel) -> f64 {
        let c = self.c;
        let mut worst = 0.0f64;
        for s in 1..self.coeffs.len() {
            let (a_next, b_next) = self.coeffs[s - 1];
            let arg = Complex64::new(1.0, 0.0)
                - (c * model.lambda
                    + model.alpha1 * b_next
                    + c * c * (0.5 * model.sigma * model.sigma));
            let a_expected = c * model.r + a_next + model.alpha0 * b_next;
            let b_expected =
                c * model.state_drift + model.beta1 * b_next - model.a * arg.ln();
            let (a_got, b_got) = self.coeffs[s];
            worst = worst
                .max((a_got - a_expected).norm())
                .max((b_got - b_expected).norm());
        }
        worst
    }
}

const BRANCH_CUT_TOL: f64 = 1e-12;

/// Runs the backward recursion for `steps` periods at argument `c`.
pub fn coef_recursion(
    model: &AffineGarchModel,
    steps: usize,
    c: Complex64,
) -> Result<CoefPath> {
    let mut coeffs = Vec::with_capacity(steps + 1);
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    coeffs.push((a, b));
    let half_sig2 = 0.5 * model.sigma * model.sigma;
    for s in 0..steps {
        let arg = Complex64::new(1.0, 0.0)
            - (c * model.lambda + model.alpha1 * b + c * c * half_sig2);
        if !arg.re.is_finite() || !arg.im.is_finite() {
            return Err(DvgError::BranchCut { step: s, arg });
        }
        if arg.re <= 0.0 && arg.im.abs() <= BRANCH_CUT_TOL * (1.0 + arg.re.abs()) {
            return Err(DvgError::BranchCut { step: s, arg });
        }
        a = c * model.r + a + model.alpha0 * b;
        b = c * model.state_drift + model.beta1 * b - model.a * arg.ln();
        coeffs.push((a, b));
    }
    Ok(CoefPath { c, coeffs })
}

/// `E_t[S_T^c] = S_t^c · exp(A + B·h_{t+1})` for a horizon of `steps`
/// periods, conditioning on spot `s_t` and state `h_next`.
pub fn terminal_mgf(
    model: &AffineGarchModel,
    s_t: f64,
    h_next: f64,
    steps: usize,
    c: Complex64,
) -> Result<Complex64> {
    let path = coef_recursion(model, steps, c)?;
    let (a, b) = path.at_valuation();
    Ok((c * s_t.ln() + a + b * h_next).exp())
}

/// Closed-form coefficients in the i.i.d. case, for cross-checks:
/// `A = c·(T-t)·r`, `B = -a·(T-t)·Log(1 - c·λ - c²σ²/2)`.
pub fn iid_closed_form(
    model: &AffineGarchModel,
    steps: usize,
    c: Complex64,
) -> (Complex64, Complex64) {
    let t = steps as f64;
    let arg = Complex64::new(1.0, 0.0)
        - (c * model.lambda + c * c * (0.5 * model.sigma * model.sigma));
    (c * model.r * t, -model.a * t * arg.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{submodel, SimConfig, Submodel};
    use approx::assert_abs_diff_eq;

    fn p_model() -> DvgParams {
        DvgParams::new(0.0001, 0.4, 0.12, 3.0, 0.05, 0.12, 0.08, 0.15).unwrap()
    }

    fn q_model() -> QParams {
        QParams::new(0.0, 0.1001, 3.0, 0.05, 0.12, 0.08, 0.15).unwrap()
    }

    #[test]
    fn one_step_coefficients_by_hand() {
        let m = AffineGarchModel::from(&p_model());
        let c = Complex64::new(0.7, 0.4);
        let path = coef_recursion(&m, 1, c).unwrap();
        let (a, b) = path.at_valuation();
        let expected_b = -m.a
            * (Complex64::new(1.0, 0.0)
                - c * m.lambda
                - c * c * (0.5 * m.sigma * m.sigma))
                .ln();
        assert_abs_diff_eq!((a - c * m.r).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((b - expected_b).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_argument_gives_zero_coefficients() {
        let m = AffineGarchModel::from(&p_model());
        let path = coef_recursion(&m, 40, Complex64::new(0.0, 0.0)).unwrap();
        for (a, b) in path.coeffs {
            assert_eq!(a, Complex64::new(0.0, 0.0));
            assert_eq!(b, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn iid_case_matches_closed_form() {
        let p = submodel(Submodel::IidVg, &p_model());
        let m = AffineGarchModel::from(&p);
        for steps in [1usize, 5, 30, 252] {
            for c in [
                Complex64::new(0.5, 0.0),
                Complex64::new(1.0, 2.0),
                Complex64::new(-0.3, 7.5),
                Complex64::new(0.0, 40.0),
            ] {
                let path = coef_recursion(&m, steps, c).unwrap();
                let (a, b) = path.at_valuation();
                let (a_cf, b_cf) = iid_closed_form(&m, steps, c);
                assert!((a - a_cf).norm() <= 1e-12 * (1.0 + a_cf.norm()));
                assert!((b - b_cf).norm() <= 1e-12 * (1.0 + b_cf.norm()));
            }
        }
    }

    #[test]
    fn terminal_mgf_at_zero_is_one() {
        let m = AffineGarchModel::from(&q_model());
        let v = terminal_mgf(&m, 1.3, 0.15, 60, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(v, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn q_measure_martingale_at_unit_argument() {
        // λ_Q = -σ_Q²/2 makes the log argument exactly 1 at c = 1, so
        // E[S_T] = S·e^{rT} holds to machine precision at every horizon
        let q = QParams::new(0.0003, 0.2, 2.0, 0.01, 0.05, 0.9, 0.04).unwrap();
        let m = AffineGarchModel::from(&q);
        for steps in [1usize, 21, 252] {
            let v = terminal_mgf(&m, 1.17, q.h1, steps, Complex64::new(1.0, 0.0)).unwrap();
            let expected = 1.17 * (q.r * steps as f64).exp();
            assert_abs_diff_eq!(v.re, expected, epsilon = 1e-12 * expected);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn iid_terminal_mgf_matches_aggregate_mixture_mgf() {
        // over T periods the i.i.d. model aggregates to a mixture with shape
        // a·h·T; compare against the static m.g.f.
        let p = submodel(Submodel::IidVg, &p_model());
        let m = AffineGarchModel::from(&p);
        let steps = 17;
        let vg = crate::mixture::VgParams::new(
            p.r * steps as f64,
            p.lambda,
            p.sigma,
            p.a * p.h1 * steps as f64,
            1.0,
        )
        .unwrap();
        for c in [Complex64::new(0.8, 0.0), Complex64::new(0.5, 1.5)] {
            let lhs = terminal_mgf(&m, 1.0, p.h1, steps, c).unwrap();
            let rhs = vg.mgf(c).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let m = AffineGarchModel::from(&q_model());
        for c in [Complex64::new(0.3, 2.0), Complex64::new(1.0, 11.0)] {
            let v = terminal_mgf(&m, 1.05, 0.15, 45, c).unwrap();
            let vc = terminal_mgf(&m, 1.05, 0.15, 45, c.conj()).unwrap();
            assert!((vc - v.conj()).norm() < 1e-12 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn resubstitution_reproduces_every_step() {
        let m = AffineGarchModel::from(&q_model());
        for c in [Complex64::new(0.5, 3.0), Complex64::new(1.0, 25.0)] {
            let path = coef_recursion(&m, 90, c).unwrap();
            assert!(path.max_recursion_residual(&m) < 1e-13);
        }
    }

    #[test]
    fn characteristic_function_is_one_at_zero_frequency() {
        let m = AffineGarchModel::from(&q_model());
        let s = 1.22;
        let v = terminal_mgf(&m, s, 0.15, 30, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!((v / Complex64::new(1.0, 0.0)).norm(), 1.0);
    }

    #[test]
    fn branch_cut_violation_reports_step() {
        // large real argument pushes the log argument through zero
        let m = AffineGarchModel::from(&p_model());
        let c = Complex64::new(40.0, 0.0);
        match coef_recursion(&m, 5, c) {
            Err(DvgError::BranchCut { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected branch-cut error, got {:?}", other),
        }
    }

    #[test]
    fn monte_carlo_agreement_short_horizons() {
        // E[S_T^c] vs the simulated average for small systems
        let q = QParams::new(0.0, 0.15, 2.0, 0.02, 0.1, 0.6, 0.05).unwrap();
        let m = AffineGarchModel::from(&q);
        let steps = 5;
        let cfg = SimConfig { steps, n_paths: 400_000, seed: 123 };
        let paths = crate::dynamics::simulate_q(&q, &cfg).unwrap();
        let spot = 1.0;
        for c in [
            Complex64::new(0.5, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.5, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 2.0),
        ] {
            let expected = terminal_mgf(&m, spot, q.h1, steps, c).unwrap();
            let draws: Vec<Complex64> = paths
                .iter()
                .map(|p| (c * p.log_return()).exp())
                .collect();
            let n = draws.len() as f64;
            let mean = draws.iter().sum::<Complex64>() / n;
            let var_re = draws.iter().map(|d| (d.re - mean.re).powi(2)).sum::<f64>() / n;
            let var_im = draws.iter().map(|d| (d.im - mean.im).powi(2)).sum::<f64>() / n;
            let se = ((var_re + var_im) / n).sqrt();
            assert!(
                (mean - expected).norm() < 4.0 * se + 1e-12,
                "c = {c}: MC {mean} vs recursion {expected} (se {se})"
            );
        }
    }
}
