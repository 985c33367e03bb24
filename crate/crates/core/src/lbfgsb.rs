//! Bound-constrained limited-memory quasi-Newton minimizer.
//!
//! Two-loop-recursion L-BFGS directions with an Armijo backtracking search
//! along the projected arc `P[x + α d]`, where `P` clamps to the lower
//! bounds. Convergence is declared when the projected gradient's ∞-norm
//! falls below the tolerance. Only lower bounds are supported; pass
//! `f64::NEG_INFINITY` for free variables.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub(crate) struct Options {
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            memory: 10,
            max_iterations: 500,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub evaluations: u64,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lower: &[f64]) {
    for (v, &l) in x.iter_mut().zip(lower) {
        if *v < l {
            *v = l;
        }
    }
}

fn projected_grad_inf_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    let mut norm = 0.0_f64;
    for i in 0..x.len() {
        let pg = if x[i] <= lower[i] { g[i].min(0.0) } else { g[i] };
        norm = norm.max(pg.abs());
    }
    norm
}

/// Minimizes `f` subject to `x ≥ lower`. `f` must write the gradient into its
/// second argument and return the objective value.
pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, lower: &[f64], opts: &Options) -> Solution
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x0.len();
    assert_eq!(lower.len(), dim);

    let mut x = x0;
    clamp(&mut x, lower);
    let mut g = vec![0.0; dim];
    let mut value = f(&x, &mut g);
    let mut evaluations = 1u64;

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, 1/s·y)
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let pg_norm = projected_grad_inf_norm(&x, &g, lower);
        if pg_norm <= opts.grad_tol {
            return Solution {
                x,
                value,
                projected_grad_norm: pg_norm,
                iterations,
                evaluations,
                converged: true,
            };
        }

        // L-BFGS two-loop recursion for d = −H·g.
        let direction = |hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]| -> Vec<f64> {
            let mut q: Vec<f64> = g.to_vec();
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, rho_inv) in hist.iter().rev() {
                let alpha = s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / rho_inv;
                for (qi, yi) in q.iter_mut().zip(y) {
                    *qi -= alpha * yi;
                }
                alphas.push(alpha);
            }
            if let Some((s, y, _)) = hist.back() {
                let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
                let yy: f64 = y.iter().map(|v| v * v).sum();
                if yy > 0.0 {
                    let gamma = sy / yy;
                    for qi in q.iter_mut() {
                        *qi *= gamma;
                    }
                }
            }
            for ((s, y, rho_inv), alpha) in hist.iter().zip(alphas.iter().rev()) {
                let beta = y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / rho_inv;
                for (qi, si) in q.iter_mut().zip(s) {
                    *qi += (alpha - beta) * si;
                }
            }
            q.iter().map(|v| -v).collect()
        };

        // Backtracking Armijo search along the projected arc. Returns the
        // accepted point or None if no step in this direction helps.
        let mut try_direction = |d: &[f64],
                                 x: &[f64],
                                 g: &[f64],
                                 value: f64,
                                 evaluations: &mut u64|
         -> Option<(Vec<f64>, Vec<f64>, f64)> {
            let mut alpha = 1.0_f64;
            for _ in 0..40 {
                let mut x_new: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
                clamp(&mut x_new, lower);
                let descent: f64 = g
                    .iter()
                    .zip(x_new.iter().zip(x))
                    .map(|(gi, (xn, xo))| gi * (xn - xo))
                    .sum();
                if descent < 0.0 {
                    let mut g_new = vec![0.0; dim];
                    let v_new = f(&x_new, &mut g_new);
                    *evaluations += 1;
                    if v_new <= value + 1e-4 * descent {
                        return Some((x_new, g_new, v_new));
                    }
                }
                alpha *= 0.5;
            }
            None
        };

        let scale = if history.is_empty() {
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm > 1.0 {
                1.0 / gnorm
            } else {
                1.0
            }
        } else {
            1.0
        };
        let d: Vec<f64> = direction(&history, &g).iter().map(|v| v * scale).collect();

        let step = match try_direction(&d, &x, &g, value, &mut evaluations) {
            Some(step) => Some(step),
            None => {
                // Quasi-Newton direction failed; fall back to projected
                // steepest descent with fresh curvature history.
                history.clear();
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                try_direction(&sd, &x, &g, value, &mut evaluations)
            }
        };

        let Some((x_new, g_new, v_new)) = step else {
            break; // no descent possible at float precision
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, sy));
        }

        x = x_new;
        g = g_new;
        value = v_new;
        iterations += 1;
    }

    let pg_norm = projected_grad_inf_norm(&x, &g, lower);
    let converged = pg_norm <= opts.grad_tol;
    Solution {
        x,
        value,
        projected_grad_norm: pg_norm,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_with_interior_minimum() {
        let sol = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 4.0 * (x[1] + 1.0);
                (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2)
            },
            vec![0.0, 0.0],
            &[f64::NEG_INFINITY, f64::NEG_INFINITY],
            &Options::default(),
        );
        assert!(sol.converged);
        assert!((sol.x[0] - 3.0).abs() < 1e-6);
        assert!((sol.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_with_active_bound() {
        // Unconstrained minimum at (−2, 5); x ≥ 0 forces x₀ to the bound.
        let sol = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] + 2.0);
                g[1] = 2.0 * (x[1] - 5.0);
                (x[0] + 2.0).powi(2) + (x[1] - 5.0).powi(2)
            },
            vec![1.0, 1.0],
            &[0.0, 0.0],
            &Options::default(),
        );
        assert!(sol.converged);
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let opts = Options {
            max_iterations: 5000,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let sol = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
                g[1] = 200.0 * (b - a * a);
                100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
            },
            vec![-1.2, 1.0],
            &[f64::NEG_INFINITY, f64::NEG_INFINITY],
            &opts,
        );
        assert!(sol.converged, "pg norm {}", sol.projected_grad_norm);
        assert!((sol.x[0] - 1.0).abs() < 1e-5);
        assert!((sol.x[1] - 1.0).abs() < 1e-5);
    }
}
