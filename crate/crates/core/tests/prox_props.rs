// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{random_logistic, random_quadratic};
use fedlab::analysis::contraction_rate;
use fedlab::losses::{ConvexityConstants, LocalLoss};
use fedlab::prox::{
    prox_exact, prox_exact_quadratic, prox_inexact_gradient, prox_logistic_newton, reflected_prox, ProxSolverSpec,
};
use fedlab::rng::GaussianStream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Quadratic with at least as many rows as columns, so it is strongly convex
/// with probability one.
fn strongly_convex(seed: u64) -> (LocalLoss, GaussianStream) {
    let mut g = GaussianStream::new(seed, 0);
    let d = 1 + (seed % 4) as usize;
    let n = d + 2 + (seed % 7) as usize;
    (LocalLoss::Quadratic(random_quadratic(&mut g, n, d)), g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prox_is_firmly_nonexpansive(seed in any::<u64>(), s in 0.01f64..10.0, logistic in any::<bool>()) {
        let mut g = GaussianStream::new(seed, 1);
        let d = 1 + (seed % 4) as usize;
        let f = if logistic {
            LocalLoss::Logistic(random_logistic(&mut g, 6, d))
        } else {
            LocalLoss::Quadratic(random_quadratic(&mut g, 6, d))
        };
        let z = g.normal_vector(d) * 3.0;
        let w = g.normal_vector(d) * 3.0;
        let pz = prox_exact(&f, s, &z).unwrap();
        let pw = prox_exact(&f, s, &w).unwrap();
        let diff = &pz - &pw;
        prop_assert!(diff.norm_squared() <= diff.dot(&(&z - &w)) + 1e-9 * (1.0 + (&z - &w).norm_squared()));
    }

    /// Inexact gradient prox error is at most `(1 - 1/(sqrt(kappa)+1))^e ||z - prox(z)||`.
    #[test]
    fn inexact_prox_error_bound(seed in any::<u64>()) {
        let (f, mut g) = strongly_convex(seed);
        let c = f.convexity_constants();
        let s = c.fedsplit_stepsize().unwrap();
        let z = g.normal_vector(f.dim()) * 2.0;
        let exact = prox_exact(&f, s, &z).unwrap();
        let q = 1.0 - 1.0 / (c.condition_number().sqrt() + 1.0);
        for e in [1, 5, 10] {
            let inexact = prox_inexact_gradient(&f, s, &z, e, &c).unwrap();
            let bound = q.powi(e as i32) * (&z - &exact).norm();
            prop_assert!((&inexact - &exact).norm() <= bound * (1.0 + 1e-9) + 1e-13, "e={e}");
        }
    }
}

/// Reflected resolvent of a strongly convex quadratic with stepsize
/// `1/sqrt(ell L)` contracts by `1 - 2/(sqrt(kappa)+1)`.
#[test]
fn reflected_resolvent_contraction() {
    let mut pairs = 0;
    for seed in 0..40u64 {
        let (f, mut g) = strongly_convex(seed);
        let c = f.convexity_constants();
        let s = c.fedsplit_stepsize().unwrap();
        let rho = contraction_rate(c.ell, c.big_l);
        for _ in 0..30 {
            let z = g.normal_vector(f.dim()) * 5.0;
            let w = g.normal_vector(f.dim()) * 5.0;
            let rz = reflected_prox(&f, s, &z, &ProxSolverSpec::exact(), &c).unwrap();
            let rw = reflected_prox(&f, s, &w, &ProxSolverSpec::exact(), &c).unwrap();
            assert!((rz - rw).norm() <= (rho + 1e-9) * (&z - &w).norm(), "seed {seed}");
            pairs += 1;
        }
    }
    assert!(pairs >= 1000);
}

#[test]
fn reflected_resolvent_with_known_constants() {
    // A = diag(1, 2): ell = 1, L = 4, s = 0.5, factor 1/3.
    let f = LocalLoss::Quadratic(
        fedlab::losses::QuadraticLoss::new(DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0])), DVector::zeros(2))
            .unwrap(),
    );
    let c = ConvexityConstants { ell: 1.0, big_l: 4.0 };
    let mut g = GaussianStream::new(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = g.normal_vector(2);
        let w = g.normal_vector(2);
        let rz = reflected_prox(&f, 0.5, &z, &ProxSolverSpec::exact(), &c).unwrap();
        let rw = reflected_prox(&f, 0.5, &w, &ProxSolverSpec::exact(), &c).unwrap();
        worst = worst.max((rz - rw).norm() / (&z - &w).norm());
    }
    assert!(worst <= 1.0 / 3.0 + 1e-9, "{worst}");
}

/// Brute-force oracle: 10k gradient steps on `h(u) = s f(u) + 1/2 ||u - z||^2`.
#[test]
fn exact_quadratic_prox_matches_descent_oracle() {
    let mut g = GaussianStream::new(77, 0);
    let q = random_quadratic(&mut g, 5, 3);
    let s = 0.3;
    let z = g.normal_vector(3);
    let (_, hi) = fedlab::losses::extreme_eigenvalues(q.gram());
    let step = 1.0 / (1.0 + s * hi);
    let mut u = z.clone();
    for _ in 0..10_000 {
        let grad = q.gradient(&u) * s + &u - &z;
        u -= grad * step;
    }
    let exact = prox_exact_quadratic(&q, s, &z).unwrap();
    assert!((exact - u).norm() <= 1e-8);
}

/// Slow first-order oracle: 10^6 gradient steps on the logistic prox subproblem.
#[test]
fn logistic_newton_prox_matches_gradient_oracle() {
    let mut g = GaussianStream::new(78, 0);
    let f = random_logistic(&mut g, 20, 3);
    let s = 0.8;
    let z = g.normal_vector(3) * 2.0;
    let big_l = fedlab::losses::extreme_eigenvalues(&(f.design().transpose() * f.design())).1 / 4.0;
    let step = 1.0 / (1.0 + s * big_l);
    let mut u = z.clone();
    for _ in 0..1_000_000 {
        let grad = f.gradient(&u) * s + &u - &z;
        u -= grad * step;
    }
    let newton = prox_logistic_newton(&f, s, &z, 1e-12, 100).unwrap();
    assert!((newton - u).norm() <= 1e-7);
}

#[test]
fn inexact_prox_approaches_exact_as_steps_grow() {
    let (f, mut g) = strongly_convex(9);
    let c = f.convexity_constants();
    let s = c.fedsplit_stepsize().unwrap();
    let z = g.normal_vector(f.dim());
    let exact = prox_exact(&f, s, &z).unwrap();
    let errs: Vec<f64> = [1, 10, 100, 400]
        .iter()
        .map(|&e| (prox_inexact_gradient(&f, s, &z, e, &c).unwrap() - &exact).norm())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]));
    assert!(errs[3] < 1e-10, "{errs:?}");
}
