// SPDX-License-Identifier: Apache-2.0

//! Damped Newton minimization with Armijo backtracking, shared by the logistic
//! prox solver and the centralized reference solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Armijo sufficient-decrease slope.
pub const ARMIJO_SLOPE: f64 = 0.25;
/// Backtracking contraction factor.
pub const BACKTRACK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Minimizes a smooth convex function from `x0` until `||grad|| <= tol`.
///
/// `eval` returns `(value, gradient, hessian)` at a point.
pub fn minimize<E>(x0: DVector<f64>, tol: f64, max_iter: usize, eval: E) -> Result<NewtonOutcome>
where
    E: Fn(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let (mut val, mut grad, mut hess) = eval(&x);
    for iter in 0..=max_iter {
        let gnorm = grad.norm();
        if gnorm <= tol {
            return Ok(NewtonOutcome { x, iterations: iter, grad_norm: gnorm });
        }
        if iter == max_iter {
            return Err(Error::NonConvergence { iterations: max_iter, residual: gnorm });
        }
        let dir = newton_direction(&hess, &grad);
        let slope = grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &x + &dir * step;
            let (cv, cg, ch) = eval(&cand);
            let armijo = cv <= val + ARMIJO_SLOPE * step * slope;
            // Near the optimum the predicted decrease drops below the rounding
            // level of the objective; fall back to gradient-norm decrease there.
            let roundoff = -slope * step <= 1e-12 * (1.0 + val.abs()) && cg.norm() < gnorm;
            if armijo || roundoff {
                accepted = Some((cand, cv, cg, ch));
                break;
            }
            step *= BACKTRACK;
        }
        match accepted {
            Some((cand, cv, cg, ch)) => {
                x = cand;
                val = cv;
                grad = cg;
                hess = ch;
            }
            None => {
                return Err(Error::NonConvergence { iterations: iter + 1, residual: gnorm });
            }
        }
    }
    unreachable!("loop returns on the final iteration")
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = hess.clone().cholesky() {
        return -chol.solve(grad);
    }
    // Singular curvature (e.g. rank-deficient logistic design): add a tiny ridge.
    let scale = 1.0 + hess.diagonal().amax();
    let mut reg = 1e-12 * scale;
    loop {
        let shifted = hess + DMatrix::identity(hess.nrows(), hess.ncols()) * reg;
        if let Some(chol) = shifted.cholesky() {
            return -chol.solve(grad);
        }
        reg *= 10.0;
    }
}
