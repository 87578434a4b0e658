//! Derivative-free and quasi-Newton minimizers for the estimation and
//! calibration objectives. Both work on unconstrained coordinates; callers
//! apply their own bound-removing transforms.

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the simplex function spread falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 20_000,
            f_tol: 1e-10,
            x_tol: 1e-10,
        }
    }
}

/// Nelder-Mead simplex minimization with the standard reflection, expansion,
/// contraction and shrink moves.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    initial_step: &[f64],
    cfg: &NelderMeadConfig,
) -> OptimResult {
    let dim = x0.len();
    assert_eq!(initial_step.len(), dim);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut xi = x0.to_vec();
        xi[i] += if initial_step[i] != 0.0 { initial_step[i] } else { 0.1 };
        simplex.push(xi);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;

    while evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = values[worst] - values[best];
        let diameter = (0..dim)
            .map(|k| {
                simplex
                    .iter()
                    .map(|x| x[k])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if spread.abs() <= cfg.f_tol * (1.0 + values[best].abs()) || diameter <= cfg.x_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; dim];
        for (idx, x) in simplex.iter().enumerate() {
            if idx == worst {
                continue;
            }
            for k in 0..dim {
                centroid[k] += x[k] / dim as f64;
            }
        }

        let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect()
        };
        let reflected = blend(&centroid, &simplex[worst], -alpha);
        let fr = eval(&reflected, &mut evals);

        if fr < values[best] {
            let expanded = blend(&centroid, &simplex[worst], -gamma);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = if fr < values[worst] {
                blend(&centroid, &reflected, rho)
            } else {
                blend(&centroid, &simplex[worst], rho)
            };
            let fc = eval(&contracted, &mut evals);
            if fc < values[worst].min(fr) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                // shrink towards the best vertex
                let best_x = simplex[best].clone();
                for idx in 0..=dim {
                    if idx == best {
                        continue;
                    }
                    simplex[idx] = blend(&best_x, &simplex[idx], sigma);
                    values[idx] = eval(&simplex[idx], &mut evals);
                }
            }
        }
    }

    let mut best_idx = 0;
    for idx in 1..=dim {
        if values[idx] < values[best_idx] {
            best_idx = idx;
        }
    }
    OptimResult {
        x: simplex[best_idx].clone(),
        f: values[best_idx],
        n_evals: evals,
        converged,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Relative finite-difference step for the numerical gradient.
    pub fd_step: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            max_iters: 300,
            grad_tol: 1e-8,
            fd_step: 1e-6,
        }
    }
}

fn numerical_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    rel_step: f64,
    evals: &mut usize,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let dn = f(&xp);
        xp[i] = x[i];
        *evals += 2;
        g[i] = (up - dn) / (2.0 * h);
    }
    g
}

/// BFGS with central-difference gradients and a backtracking Armijo line
/// search. Suited to the smooth calibration losses; falls back on the caller
/// to polish with the simplex when the surface is noisy.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], cfg: &BfgsConfig) -> OptimResult {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    evals += 1;
    if !fx.is_finite() {
        return OptimResult { x, f: fx, n_evals: evals, converged: false };
    }
    let mut g = numerical_gradient(&mut f, &x, cfg.fd_step, &mut evals);
    // inverse Hessian approximation
    let mut h_inv: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < cfg.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // direction = -H_inv * g
        let mut dir = vec![0.0; dim];
        for i in 0..dim {
            for j in 0..dim {
                dir[i] -= h_inv[i][j] * g[j];
            }
        }
        let descent: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if descent >= 0.0 {
            // reset to steepest descent when curvature information degenerates
            for i in 0..dim {
                for j in 0..dim {
                    h_inv[i][j] = if i == j { 1.0 } else { 0.0 };
                }
                dir[i] = -g[i];
            }
        }

        // backtracking Armijo search
        let mut step = 1.0;
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        let mut x_new = x.clone();
        let mut f_new = f64::INFINITY;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..dim {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new);
            evals += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }

        let g_new = numerical_gradient(&mut f, &x_new, cfg.fd_step, &mut evals);
        let s: Vec<f64> = (0..dim).map(|i| x_new[i] - x[i]).collect();
        let yv: Vec<f64> = (0..dim).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // BFGS inverse update: H = (I - s yᵀ/sy) H (I - y sᵀ/sy) + s sᵀ/sy
            let mut hy = vec![0.0; dim];
            for i in 0..dim {
                for j in 0..dim {
                    hy[i] += h_inv[i][j] * yv[j];
                }
            }
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..dim {
                for j in 0..dim {
                    h_inv[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    OptimResult { x, f: fx, n_evals: evals, converged }
}
