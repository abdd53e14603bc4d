// SPDX-License-Identifier: Apache-2.0

//! Closed-form limits, fixed-point residuals, reference optima and
//! rate/complexity measurements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{extreme_eigenvalues, QuadraticLoss};
use crate::newton;
use crate::problem::FederatedProblem;
use crate::prox::prox_exact;
use crate::trace::Trace;

/// Iteration cap for the centralized Newton reference solver.
pub const REFERENCE_NEWTON_MAX_ITER: usize = 200;
/// Smallest `lambda_min / lambda_max` accepted for the aggregate Gram matrix.
const GRAM_RCOND_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethod {
    DirectSolve,
    Newton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    pub method: ReferenceMethod,
    /// `||sum_j grad f_j(x_star)||`
    pub residual: f64,
}

fn require_quadratic(problem: &FederatedProblem) -> Result<Vec<&QuadraticLoss>> {
    problem
        .quadratic_clients()
        .ok_or_else(|| Error::InvalidParameter("closed-form oracles need least-squares clients".into()))
}

fn sum_matrices<'a>(d: usize, ms: impl Iterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(d, d);
    for m in ms {
        acc += m;
    }
    acc
}

/// `(sum_j A_j^T A_j)^{-1} sum_j A_j^T b_j` by Cholesky solve with one step of
/// iterative refinement.
pub fn lsq_optimum(problem: &FederatedProblem) -> Result<DVector<f64>> {
    let quads = require_quadratic(problem)?;
    let d = problem.dim();
    let gram = sum_matrices(d, quads.iter().map(|q| q.gram()));
    let mut rhs = DVector::zeros(d);
    for q in &quads {
        rhs += q.atb();
    }
    let (lo, hi) = extreme_eigenvalues(&gram);
    if !(hi > 0.0) || lo <= GRAM_RCOND_FLOOR * hi {
        return Err(Error::Degenerate(format!(
            "aggregate Gram matrix is singular (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("aggregate Gram matrix is not positive definite".into()))?;
    let mut x = chol.solve(&rhs);
    let r = &rhs - &gram * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// `sum_{k<e} (I - s G)^k`, accumulated term by term.
fn geometric_sum(gram: &DMatrix<f64>, s: f64, e: usize) -> DMatrix<f64> {
    let d = gram.nrows();
    let step = DMatrix::identity(d, d) - gram * s;
    let mut term = DMatrix::identity(d, d);
    let mut acc = DMatrix::zeros(d, d);
    for k in 0..e {
        acc += &term;
        if k + 1 < e {
            term = &term * &step;
        }
    }
    acc
}

fn solve_general(lhs: DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let lu = lhs.clone().lu();
    let x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Degenerate(format!("{what}: linear system is singular")))?;
    // One refinement step.
    let r = rhs - &lhs * &x;
    Ok(match lu.solve(&r) {
        Some(dx) => x + dx,
        None => x,
    })
}

/// Limit of FedGD with `e` local steps on least squares:
/// `(sum_j G_j S_j)^{-1} sum_j S_j A_j^T b_j` with `S_j = sum_{k<e} (I - s G_j)^k`.
pub fn fedgd_limit_lsq(problem: &FederatedProblem, s: f64, e: usize) -> Result<DVector<f64>> {
    if !(s > 0.0) || e < 1 {
        return Err(Error::InvalidParameter(format!("need s > 0 and e >= 1 (s = {s}, e = {e})")));
    }
    let quads = require_quadratic(problem)?;
    let d = problem.dim();
    let mut lhs = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (j, q) in quads.iter().enumerate() {
        let (lo, hi) = extreme_eigenvalues(q.gram());
        let norm = (1.0 - s * lo).abs().max((1.0 - s * hi).abs());
        if norm >= 1.0 {
            return Err(Error::Stepsize { s, client: j, norm });
        }
        let sj = geometric_sum(q.gram(), s, e);
        lhs += q.gram() * &sj;
        rhs += &sj * q.atb();
    }
    solve_general(lhs, &rhs, "FedGD limit")
}

/// Limit of FedProx on least squares:
/// `[sum_j (I - (I + s G_j)^{-1})]^{-1} sum_j (G_j + I/s)^{-1} A_j^T b_j`.
pub fn fedprox_limit_lsq(problem: &FederatedProblem, s: f64) -> Result<DVector<f64>> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("need s > 0, got {s}")));
    }
    let quads = require_quadratic(problem)?;
    let d = problem.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut lhs = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for q in &quads {
        let chol = (&eye + q.gram() * s)
            .cholesky()
            .ok_or_else(|| Error::Degenerate("I + s A^T A is not positive definite".into()))?;
        let inv = chol.inverse();
        lhs += &eye - &inv;
        // (G + I/s)^{-1} = s (I + s G)^{-1}
        rhs += chol.solve(q.atb()) * s;
    }
    solve_general(lhs, &rhs, "FedProx limit")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResiduals {
    /// `||sum_j sum_{i=1..e} grad f_j(G_j^{i-1}(x))||`
    pub fedgd_res: f64,
    /// `||sum_j grad M_{s f_j}(x)||`
    pub fedprox_res: f64,
    /// `||sum_j grad f_j(x)||`
    pub stationarity: f64,
}

pub fn fixedpoint_residuals(
    problem: &FederatedProblem,
    s: f64,
    e: usize,
    x: &DVector<f64>,
) -> Result<FixedPointResiduals> {
    if !(s > 0.0) || e < 1 {
        return Err(Error::InvalidParameter(format!("need s > 0 and e >= 1 (s = {s}, e = {e})")));
    }
    problem.check_point(x)?;
    let d = problem.dim();
    let mut gd = DVector::zeros(d);
    let mut prox = DVector::zeros(d);
    for f in problem.clients() {
        let mut y = x.clone();
        for _ in 0..e {
            let g = f.gradient(&y);
            gd += &g;
            y -= g * s;
        }
        prox += (x - prox_exact(f, s, x)?) / s;
    }
    Ok(FixedPointResiduals {
        fedgd_res: gd.norm(),
        fedprox_res: prox.norm(),
        stationarity: problem.gradient(x).norm(),
    })
}

/// Least-squares problems use [`lsq_optimum`]; anything else runs centralized
/// damped Newton on `F` from the origin until `||grad F|| <= tol`.
pub fn reference_optimum(problem: &FederatedProblem, tol: f64) -> Result<ReferenceSolution> {
    let (x_star, method) = if problem.is_least_squares() {
        (lsq_optimum(problem)?, ReferenceMethod::DirectSolve)
    } else {
        let out = newton::minimize(DVector::zeros(problem.dim()), tol, REFERENCE_NEWTON_MAX_ITER, |x| {
            (problem.cost(x), problem.gradient(x), problem.hessian(x))
        })?;
        (out.x, ReferenceMethod::Newton)
    };
    Ok(ReferenceSolution {
        f_star: problem.cost(&x_star),
        residual: problem.gradient(&x_star).norm(),
        x_star,
        method,
    })
}

/// `rho = 1 - 2 / (sqrt(L/ell) + 1)`.
pub fn contraction_rate(ell_star: f64, big_l_star: f64) -> f64 {
    1.0 - 2.0 / ((big_l_star / ell_star).sqrt() + 1.0)
}

/// First round index `t` with `F(x^(t)) - F* <= eps`.
pub fn iteration_complexity(trace: &Trace, f_star: f64, eps: f64) -> Option<usize> {
    trace.records.iter().find(|r| r.cost - f_star <= eps).map(|r| r.t)
}

/// Iterates `step` until consecutive iterates differ by at most
/// `1e-13 (1 + ||x||)` or `cap` steps have run. Returns the last iterate and
/// the number of steps taken.
pub fn iterate_to_fixed_point<F>(x0: DVector<f64>, cap: usize, mut step: F) -> (DVector<f64>, usize)
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    for k in 1..=cap {
        let next = step(&x);
        let moved = (&next - &x).norm();
        x = next;
        if moved <= 1e-13 * (1.0 + x.norm()) {
            return (x, k);
        }
    }
    (x, cap)
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `sqrt(SSE / (n - 2))`; zero when `n = 2`.
    pub residual_std_error: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual_std_error = if n > 2 { (sse / (nf - 2.0)).sqrt() } else { 0.0 };
    Some(LineFit { slope, intercept, residual_std_error, points: n })
}

/// Fit of `log10 T` against `log10 kappa`.
pub fn fit_loglog(kappas: &[f64], rounds: &[f64]) -> Option<LineFit> {
    let xs: Vec<f64> = kappas.iter().map(|k| k.log10()).collect();
    let ys: Vec<f64> = rounds.iter().map(|t| t.log10()).collect();
    fit_line(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LocalLoss, LogisticLoss};
    use crate::trace::{RoundRecord, TraceMeta};
    use proptest::prelude::*;

    fn quad(a: DMatrix<f64>, b: DVector<f64>) -> LocalLoss {
        LocalLoss::Quadratic(QuadraticLoss::new(a, b).unwrap())
    }

    fn scalar_problem() -> FederatedProblem {
        FederatedProblem::new(vec![
            quad(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 2.0)),
            quad(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0)),
        ])
        .unwrap()
    }

    #[test]
    fn lsq_scalar() {
        let x = lsq_optimum(&scalar_problem()).unwrap();
        assert!((x[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn lsq_identity_designs_average_responses() {
        let bs = [[1.0, 2.0], [3.0, -4.0], [0.5, 0.5]];
        let p = FederatedProblem::new(
            bs.iter().map(|b| quad(DMatrix::identity(2, 2), DVector::from_column_slice(b))).collect(),
        )
        .unwrap();
        let x = lsq_optimum(&p).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn lsq_square_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_column_slice(&[3.0, 5.0]);
        let p = FederatedProblem::new(vec![quad(a.clone(), b.clone())]).unwrap();
        let x = lsq_optimum(&p).unwrap();
        assert!((&a * &x - b).norm() < 1e-13);
    }

    #[test]
    fn lsq_singular_is_degenerate() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = FederatedProblem::new(vec![quad(a, DVector::from_element(1, 1.0))]).unwrap();
        assert!(matches!(lsq_optimum(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fedgd_limit_examples() {
        let p = scalar_problem();
        let x = fedgd_limit_lsq(&p, 0.1, 2).unwrap();
        assert!((x[0] - 4.5 / 8.3).abs() < 1e-15);
        let x1 = fedgd_limit_lsq(&p, 0.1, 1).unwrap();
        assert!((x1[0] - 0.6).abs() < 1e-15);
        assert!(matches!(fedgd_limit_lsq(&p, 0.6, 2), Err(Error::Stepsize { client: 0, .. })));
    }

    #[test]
    fn fedgd_limit_single_client() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let b = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let p = FederatedProblem::new(vec![quad(a, b)]).unwrap();
        let ls = lsq_optimum(&p).unwrap();
        for e in [1, 3, 17] {
            assert!((fedgd_limit_lsq(&p, 0.1, e).unwrap() - &ls).norm() < 1e-12);
        }
    }

    #[test]
    fn fedprox_limit_examples() {
        let p = scalar_problem();
        let x = fedprox_limit_lsq(&p, 0.1).unwrap();
        let oracle = (4.0 / 14.0 - 1.0 / 11.0) / ((1.0 - 1.0 / 1.4) + (1.0 - 1.0 / 1.1));
        assert!((x[0] - oracle).abs() < 1e-14);
        assert!((x[0] - 0.5172414).abs() < 1e-7);
        let small = fedprox_limit_lsq(&p, 1e-6).unwrap();
        assert!((small[0] - 0.6).abs() < 1e-3);
    }

    #[test]
    fn fedprox_limit_identical_clients() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let b = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let p = FederatedProblem::new(vec![quad(a.clone(), b.clone()), quad(a, b)]).unwrap();
        let ls = lsq_optimum(&p).unwrap();
        assert!((fedprox_limit_lsq(&p, 0.7).unwrap() - ls).norm() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let b = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let sym = FederatedProblem::new(vec![quad(a.clone(), b.clone()), quad(a, b)]).unwrap();
        let r = fixedpoint_residuals(&sym, 0.1, 3, &lsq_optimum(&sym).unwrap()).unwrap();
        assert!(r.fedgd_res <= 1e-10 && r.fedprox_res <= 1e-10 && r.stationarity <= 1e-10, "{r:?}");

        let p = scalar_problem();
        let gd = fedgd_limit_lsq(&p, 0.1, 2).unwrap();
        let r = fixedpoint_residuals(&p, 0.1, 2, &gd).unwrap();
        assert!(r.fedgd_res <= 1e-9 && r.stationarity > 1e-3, "{r:?}");
        let fp = fedprox_limit_lsq(&p, 0.1).unwrap();
        let r = fixedpoint_residuals(&p, 0.1, 2, &fp).unwrap();
        assert!(r.fedprox_res <= 1e-9, "{r:?}");
    }

    #[test]
    fn reference_paths() {
        let p = scalar_problem();
        let r = reference_optimum(&p, 1e-12).unwrap();
        assert_eq!(r.method, ReferenceMethod::DirectSolve);
        assert_eq!(r.x_star, lsq_optimum(&p).unwrap());

        let zero = LogisticLoss::new(DMatrix::zeros(4, 3), DVector::from_column_slice(&[1.0, -1.0, 1.0, 1.0])).unwrap();
        let lp = FederatedProblem::new(vec![LocalLoss::Logistic(zero)]).unwrap();
        let r = reference_optimum(&lp, 1e-12).unwrap();
        assert_eq!(r.method, ReferenceMethod::Newton);
        assert!((r.f_star - 4.0 * std::f64::consts::LN_2).abs() < 1e-14);
        assert!(r.residual == 0.0);
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(contraction_rate(1.0, 1.0), 0.0);
        assert!((contraction_rate(1.0, 4.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((contraction_rate(1.0, 1e4) - (1.0 - 2.0 / 101.0)).abs() < 1e-15);
    }

    fn synthetic_trace(gaps: &[f64]) -> Trace {
        Trace {
            records: gaps
                .iter()
                .enumerate()
                .map(|(i, &g)| RoundRecord {
                    t: i + 1,
                    x: DVector::zeros(1),
                    cost: g,
                    grad_norm: 0.0,
                    gap: Some(g),
                    dist_to_ref: None,
                    prox_residual: None,
                    prox_residual_max: None,
                })
                .collect(),
            meta: TraceMeta {
                label: "synthetic".into(),
                spec: None,
                stepsize: 1.0,
                lambda: None,
                seed: None,
                f_star: Some(0.0),
                wall_ms: 0,
            },
        }
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(iteration_complexity(&synthetic_trace(&[0.0, 0.0]), 0.0, 1e-3), Some(1));
        let (g, rho, eps) = (2.0f64, 0.9f64, 1e-4);
        let gaps: Vec<f64> = (0..400).map(|k| g * rho.powi(k)).collect();
        let expected = (1.0 + (eps / g).ln() / rho.ln()).ceil() as usize;
        assert_eq!(iteration_complexity(&synthetic_trace(&gaps), 0.0, eps), Some(expected));
        assert_eq!(iteration_complexity(&synthetic_trace(&[1.0, 0.5]), 0.0, 1e-3), None);
    }

    #[test]
    fn line_fit_exact() {
        let f = fit_loglog(&[10.0, 100.0, 1000.0], &[20.0, 200.0, 2000.0]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.residual_std_error < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }

    proptest! {
        #[test]
        fn contraction_monotone(k1 in 1.0f64..1e6, k2 in 1.0f64..1e6) {
            let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
            let (r1, r2) = (contraction_rate(1.0, lo), contraction_rate(1.0, hi));
            prop_assert!(r1 <= r2);
            prop_assert!((0.0..1.0).contains(&r1) && (0.0..1.0).contains(&r2));
        }

        #[test]
        fn fedgd_limit_with_one_epoch_is_lsq(
            m in 1usize..4,
            d in 1usize..5,
            seed in 0u64..1000,
        ) {
            let mut g = crate::rng::GaussianStream::new(seed, 0);
            let clients = (0..m)
                .map(|_| quad(g.normal_matrix(d + 3, d), g.normal_vector(d + 3)))
                .collect();
            let p = FederatedProblem::new(clients).unwrap();
            let s = 0.5 / p.constants().big_l;
            let ls = lsq_optimum(&p).unwrap();
            let gd = fedgd_limit_lsq(&p, s, 1).unwrap();
            prop_assert!((gd - &ls).norm() <= 1e-12 * (1.0 + ls.norm()) * 10.0);
        }
    }
}
