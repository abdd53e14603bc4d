// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use fedlab::losses::{LocalLoss, LogisticLoss, QuadraticLoss};
use fedlab::problem::FederatedProblem;
use fedlab::rng::GaussianStream;
use nalgebra::{DMatrix, DVector};

pub fn scalar(a: f64, b: f64) -> LocalLoss {
    LocalLoss::Quadratic(QuadraticLoss::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b)).unwrap())
}

/// Two clients `A_1 = [2], b_1 = [2]`, `A_2 = [1], b_2 = [-1]`; least-squares optimum 0.6.
pub fn scalar_problem() -> FederatedProblem {
    FederatedProblem::new(vec![scalar(2.0, 2.0), scalar(1.0, -1.0)]).unwrap()
}

pub fn random_quadratic(g: &mut GaussianStream, n: usize, d: usize) -> QuadraticLoss {
    QuadraticLoss::new(g.normal_matrix(n, d), g.normal_vector(n)).unwrap()
}

pub fn random_logistic(g: &mut GaussianStream, n: usize, d: usize) -> LogisticLoss {
    let a = g.normal_matrix(n, d);
    let b = DVector::from_fn(n, |_, _| if g.uniform() <= 0.5 { 1.0 } else { -1.0 });
    LogisticLoss::new(a, b).unwrap()
}

/// Gaussian least-squares problem with `n` rows per client.
pub fn random_lsq(seed: u64, m: usize, d: usize, n: usize) -> FederatedProblem {
    let mut g = GaussianStream::new(seed, 0);
    FederatedProblem::new((0..m).map(|_| LocalLoss::Quadratic(random_quadratic(&mut g, n, d))).collect()).unwrap()
}

/// Small deterministic integer in `lo..=hi` drawn from the stream.
pub fn pick(g: &mut GaussianStream, lo: usize, hi: usize) -> usize {
    lo + ((g.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}
