use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrajOptError;

/// A nonlinear least-squares problem `min ½‖r(x)‖²` (the reported cost is
/// `‖r‖²` without the half).
pub trait LeastSquaresProblem {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Analytic Jacobian; `None` falls back to forward differences.
    fn jacobian(&self, _x: &DVector<f64>, _r: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Adapts a closure into a problem with finite-difference Jacobians.
pub struct ResidualFn<F>(pub F);

impl<F: Fn(&DVector<f64>) -> DVector<f64>> LeastSquaresProblem for ResidualFn<F> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.0)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmOptions {
    pub max_iters: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.5,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmReport {
    pub x: DVector<f64>,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
}

pub fn forward_difference_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    r: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(r.len(), x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let orig = xp[k];
        xp[k] = orig + h;
        let rp = problem.residuals(&xp);
        jac.set_column(k, &((rp - r) / h));
        xp[k] = orig;
    }
    jac
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Levenberg–Marquardt with diagonal (Marquardt) scaling. Steps are accepted
/// only when the cost strictly decreases, so the cost history is monotone.
pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    opts: &LmOptions,
) -> Result<LmReport, TrajOptError> {
    let mut x = x0;
    let mut r = problem.residuals(&x);
    if !finite(&r) || !finite(&x) {
        return Err(TrajOptError::NonFinite {
            last_valid: x.iter().copied().collect(),
        });
    }
    let mut cost = r.norm_squared();
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut lambda = opts.lambda0;
    let mut accepted = 0;
    let mut converged = false;
    let mut iterations = 0;

    if x.is_empty() {
        return Ok(LmReport {
            x,
            cost,
            initial_cost,
            iterations: 0,
            accepted_steps: 0,
            converged: true,
            cost_history: history,
        });
    }

    let mut jac = problem
        .jacobian(&x, &r)
        .unwrap_or_else(|| forward_difference_jacobian(problem, &x, &r, opts.fd_step));
    while iterations < opts.max_iters {
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut a = jtj.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-9);
        }
        let step = match a.cholesky() {
            Some(c) => c.solve(&(-&grad)),
            None => {
                lambda *= opts.lambda_up;
                continue;
            }
        };
        if step.norm() < opts.step_tol * (x.norm() + opts.step_tol) {
            converged = true;
            break;
        }
        let x_new = &x + &step;
        let r_new = problem.residuals(&x_new);
        if !finite(&r_new) {
            return Err(TrajOptError::NonFinite {
                last_valid: x.iter().copied().collect(),
            });
        }
        let cost_new = r_new.norm_squared();
        if cost_new < cost {
            x = x_new;
            r = r_new;
            cost = cost_new;
            history.push(cost);
            accepted += 1;
            lambda = (lambda * opts.lambda_down).max(1e-12);
            jac = problem
                .jacobian(&x, &r)
                .unwrap_or_else(|| forward_difference_jacobian(problem, &x, &r, opts.fd_step));
        } else {
            lambda *= opts.lambda_up;
            if lambda > 1e16 {
                break;
            }
        }
    }
    Ok(LmReport {
        x,
        cost,
        initial_cost,
        iterations,
        accepted_steps: accepted,
        converged,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rosenbrock() -> ResidualFn<impl Fn(&DVector<f64>) -> DVector<f64>> {
        ResidualFn(|x: &DVector<f64>| {
            DVector::from_row_slice(&[10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
        })
    }

    #[test]
    fn linear_least_squares_in_three_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // tall random systems; the damped steps shrink the error by about
        // λ / (μ_min + λ) each, so the bound needs a well-conditioned A
        for _ in 0..20 {
            let a = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
            // oracle: normal equations via a separate decomposition
            let exact = (a.transpose() * &a)
                .lu()
                .solve(&(a.transpose() * &b))
                .unwrap();
            let (a2, b2) = (a.clone(), b.clone());
            let p = ResidualFn(move |x: &DVector<f64>| &a2 * x - &b2);
            let opts = LmOptions {
                max_iters: 3,
                ..Default::default()
            };
            let rep = levenberg_marquardt(&p, DVector::zeros(4), &opts).unwrap();
            assert!(rep.iterations <= 3);
            assert!((rep.x - exact).amax() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let rep = levenberg_marquardt(
            &rosenbrock(),
            DVector::from_row_slice(&[-1.2, 1.0]),
            &LmOptions::default(),
        )
        .unwrap();
        assert!(
            (rep.x[0] - 1.0).abs() < 1e-6 && (rep.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            rep.x
        );
        assert!(rep.cost.sqrt() < 1e-6);
        assert!(rep.converged);
    }

    #[test]
    fn optimal_start_takes_no_steps() {
        let rep = levenberg_marquardt(
            &rosenbrock(),
            DVector::from_row_slice(&[1.0, 1.0]),
            &LmOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_eq!(rep.accepted_steps, 0);
        assert_eq!(rep.cost, 0.0);
    }

    #[test]
    fn cost_history_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let c: f64 = rng.random_range(0.5..3.0);
            let p = ResidualFn(move |x: &DVector<f64>| {
                DVector::from_row_slice(&[
                    c * (x[1] - x[0].sin()),
                    1.0 - x[0] * x[1],
                    (x[0] + x[1]).cos(),
                ])
            });
            let x0 = DVector::from_row_slice(&[
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            let rep = levenberg_marquardt(&p, x0, &LmOptions::default()).unwrap();
            assert!(rep.cost_history.windows(2).all(|w| w[1] < w[0]));
            assert!(rep.cost <= rep.initial_cost);
        }
    }

    #[test]
    fn non_finite_residual_is_an_error() {
        let p = ResidualFn(|x: &DVector<f64>| DVector::from_row_slice(&[x[0].ln() + 10.0]));
        let err = levenberg_marquardt(&p, DVector::from_row_slice(&[1.0]), &LmOptions::default())
            .unwrap_err();
        match err {
            TrajOptError::NonFinite { last_valid } => assert!(last_valid[0] > 0.0),
            e => panic!("unexpected {e}"),
        }
    }
}
