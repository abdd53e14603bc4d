// SPDX-License-Identifier: Apache-2.0

//! Seeded generators for the synthetic problem ensembles.
//!
//! Draw order is part of the format: see [`crate::rng`] for the stream layout.
//! Within a client stream, draws happen in this order:
//!
//! * isotropic least squares: `A` (row-major), then noise `v`;
//! * conditioned least squares: the `n x d` Gaussian for the left Haar
//!   factor (row-major), the `d x d` Gaussian for the right factor, then noise;
//! * logistic: `A` (row-major), then one uniform per label.
//!
//! `x_true` is drawn from the global stream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LocalLoss, LogisticLoss, QuadraticLoss};
use crate::problem::FederatedProblem;
use crate::rng::{client_stream, GaussianStream, GLOBAL_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleKind {
    IsotropicLsq { m: usize, d: usize, n: usize, sigma2: f64 },
    ConditionedLsq { m: usize, d: usize, n: usize, kappa: f64, sigma2: f64 },
    LogisticGauss { m: usize, d: usize, n: usize },
}

impl EnsembleKind {
    pub fn validate(&self) -> Result<()> {
        let (m, d, n) = self.shape();
        if m < 1 || d < 1 || n < 1 {
            return Err(Error::InvalidParameter(format!("ensemble needs m, d, n >= 1 (got {m}, {d}, {n})")));
        }
        match *self {
            EnsembleKind::IsotropicLsq { sigma2, .. } if !(sigma2 >= 0.0) => {
                Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")))
            }
            EnsembleKind::ConditionedLsq { sigma2, kappa, .. } => {
                if n < d {
                    Err(Error::InvalidParameter(format!("conditioned ensemble needs n >= d (got n={n}, d={d})")))
                } else if !(kappa >= 1.0) || !kappa.is_finite() {
                    Err(Error::InvalidParameter(format!("kappa must be >= 1, got {kappa}")))
                } else if !(sigma2 >= 0.0) {
                    Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `(m, d, n)`
    pub fn shape(&self) -> (usize, usize, usize) {
        match *self {
            EnsembleKind::IsotropicLsq { m, d, n, .. }
            | EnsembleKind::ConditionedLsq { m, d, n, .. }
            | EnsembleKind::LogisticGauss { m, d, n } => (m, d, n),
        }
    }

    pub fn is_least_squares(&self) -> bool {
        !matches!(self, EnsembleKind::LogisticGauss { .. })
    }

    pub fn with_kappa(&self, new_kappa: f64) -> Result<Self> {
        match *self {
            EnsembleKind::ConditionedLsq { m, d, n, sigma2, .. } => {
                Ok(EnsembleKind::ConditionedLsq { m, d, n, kappa: new_kappa, sigma2 })
            }
            _ => Err(Error::Config("kappa grid requires a conditioned_lsq ensemble".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn generate(&self) -> Result<FederatedProblem> {
        self.kind.validate()?;
        match self.kind {
            EnsembleKind::IsotropicLsq { m, d, n, sigma2 } => gen_isotropic_lsq(m, d, n, sigma2, self.seed),
            EnsembleKind::ConditionedLsq { m, d, n, kappa, sigma2 } => {
                gen_conditioned_lsq(m, d, n, kappa, sigma2, self.seed)
            }
            EnsembleKind::LogisticGauss { m, d, n } => gen_logistic(m, d, n, self.seed),
        }
    }
}

/// Thin-QR sign fix: flips columns of `Q` so that `R` has a positive diagonal.
/// Returns `None` on an exactly rank-deficient draw.
fn sign_fixed_q(g: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        let rkk = r[(k, k)];
        if rkk == 0.0 {
            return None;
        }
        if rkk < 0.0 {
            col.neg_mut();
        }
    }
    Some(q)
}

/// Haar-distributed `l x l` orthogonal matrix: QR of a Gaussian matrix with
/// the `R_ii > 0` sign convention (plain Householder QR is not Haar).
pub fn sample_haar_orthogonal(l: usize, rng: &mut GaussianStream) -> DMatrix<f64> {
    sample_haar_columns(l, l, rng)
}

/// First `k` columns of a Haar-distributed `n x n` orthogonal matrix.
pub fn sample_haar_columns(n: usize, k: usize, rng: &mut GaussianStream) -> DMatrix<f64> {
    assert!(k >= 1 && n >= k, "need 1 <= k <= n");
    loop {
        if let Some(q) = sign_fixed_q(rng.normal_matrix(n, k)) {
            return q;
        }
    }
}

fn finish(clients: Vec<LocalLoss>, x_true: DVector<f64>, seed: u64) -> Result<FederatedProblem> {
    let mut p = FederatedProblem::new(clients)?.with_truth(x_true);
    p.seed = Some(seed);
    Ok(p)
}

/// `A_j` with i.i.d. `N(0, 1)` entries and `b_j = A_j x_true + v_j`, `v_j ~ N(0, sigma2 I)`.
pub fn gen_isotropic_lsq(m: usize, d: usize, n: usize, sigma2: f64, seed: u64) -> Result<FederatedProblem> {
    EnsembleKind::IsotropicLsq { m, d, n, sigma2 }.validate()?;
    let x_true = GaussianStream::new(seed, GLOBAL_STREAM).normal_vector(d);
    let sigma = sigma2.sqrt();
    let clients = (0..m)
        .map(|j| {
            let mut rng = GaussianStream::new(seed, client_stream(j));
            let a = rng.normal_matrix(n, d);
            let noise = rng.normal_vector(n) * sigma;
            let b = &a * &x_true + noise;
            QuadraticLoss::new(a, b).map(LocalLoss::Quadratic)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(clients, x_true, seed)
}

/// Spiked ensemble: `A_j = U_j diag(sqrt(kappa), 1, ..., 1) V_j` padded to
/// `n x d`, with Haar `U_j`, `V_j`, so every client has `ell = 1`, `L = kappa`.
pub fn gen_conditioned_lsq(
    m: usize,
    d: usize,
    n: usize,
    kappa: f64,
    sigma2: f64,
    seed: u64,
) -> Result<FederatedProblem> {
    EnsembleKind::ConditionedLsq { m, d, n, kappa, sigma2 }.validate()?;
    let x0 = GaussianStream::new(seed, GLOBAL_STREAM).normal_vector(d);
    let sigma = sigma2.sqrt();
    let spike = kappa.sqrt();
    let clients = (0..m)
        .map(|j| {
            let mut rng = GaussianStream::new(seed, client_stream(j));
            // Only the first d columns of U meet the nonzero block of the padded diagonal.
            let mut u = sample_haar_columns(n, d, &mut rng);
            let v = sample_haar_orthogonal(d, &mut rng);
            u.column_mut(0).scale_mut(spike);
            let a = u * v;
            let noise = rng.normal_vector(n) * sigma;
            let b = &a * &x0 + noise;
            QuadraticLoss::new(a, b).map(LocalLoss::Quadratic)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(clients, x0, seed)
}

/// Label `+1` with probability `e^t / (1 + e^t)` for margin `t`, given a
/// uniform draw `u` in `(0, 1]`.
pub fn bernoulli_label(margin: f64, u: f64) -> f64 {
    if u <= crate::losses::sigmoid(margin) {
        1.0
    } else {
        -1.0
    }
}

/// Gaussian features, `x_true ~ N(0, I)`, labels from the logistic model.
pub fn gen_logistic(m: usize, d: usize, n: usize, seed: u64) -> Result<FederatedProblem> {
    EnsembleKind::LogisticGauss { m, d, n }.validate()?;
    let x_true = GaussianStream::new(seed, GLOBAL_STREAM).normal_vector(d);
    let clients = (0..m)
        .map(|j| {
            let mut rng = GaussianStream::new(seed, client_stream(j));
            let a = rng.normal_matrix(n, d);
            let margins = &a * &x_true;
            let labels = margins.map(|t| bernoulli_label(t, rng.uniform()));
            LogisticLoss::new(a, labels).map(LocalLoss::Logistic)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(clients, x_true, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = GaussianStream::new(5, 0);
        for l in [1, 2, 7, 30] {
            let q = sample_haar_orthogonal(l, &mut rng);
            let err = (q.tr_mul(&q) - DMatrix::identity(l, l)).amax();
            assert!(err <= 1e-10, "l={l}: {err}");
        }
    }

    #[test]
    fn haar_one_by_one_is_sign() {
        let mut rng = GaussianStream::new(11, 0);
        for _ in 0..50 {
            let q = sample_haar_orthogonal(1, &mut rng);
            assert!(q[(0, 0)] == 1.0 || q[(0, 0)] == -1.0);
        }
    }

    #[test]
    fn haar_entry_mean_is_zero() {
        // Monte-Carlo oracle: Q_11 is symmetric about zero with variance 1/l.
        let mut rng = GaussianStream::new(77, 0);
        let draws = 10_000;
        let mean: f64 = (0..draws).map(|_| sample_haar_orthogonal(3, &mut rng)[(0, 0)]).sum::<f64>()
            / draws as f64;
        assert!(mean.abs() <= 3.0 / (draws as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn bernoulli_label_zero_margin_is_fair() {
        assert_eq!(bernoulli_label(0.0, 0.5), 1.0);
        assert_eq!(bernoulli_label(0.0, 0.5000001), -1.0);
    }

    #[test]
    fn bernoulli_rate_at_margin_one() {
        let mut rng = GaussianStream::new(3, 0);
        let draws = 100_000;
        let pos = (0..draws).filter(|_| bernoulli_label(1.0, rng.uniform()) > 0.0).count();
        let rate = pos as f64 / draws as f64;
        let expected = std::f64::consts::E / (1.0 + std::f64::consts::E);
        assert!((rate - expected).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn validation() {
        assert!(EnsembleKind::ConditionedLsq { m: 2, d: 5, n: 4, kappa: 10.0, sigma2: 1.0 }.validate().is_err());
        assert!(EnsembleKind::ConditionedLsq { m: 2, d: 5, n: 5, kappa: 0.5, sigma2: 1.0 }.validate().is_err());
        assert!(EnsembleKind::IsotropicLsq { m: 0, d: 5, n: 5, sigma2: 1.0 }.validate().is_err());
        assert!(EnsembleKind::IsotropicLsq { m: 25, d: 500, n: 5000, sigma2: 0.25 }.validate().is_ok());
        assert!(EnsembleKind::LogisticGauss { m: 10, d: 100, n: 1000 }.validate().is_ok());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = gen_isotropic_lsq(2, 3, 10, 0.25, 99).unwrap().to_json().unwrap();
        let b = gen_isotropic_lsq(2, 3, 10, 0.25, 99).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = gen_isotropic_lsq(2, 3, 10, 0.25, 100).unwrap().to_json().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn client_data_independent_of_m() {
        let small = gen_logistic(2, 3, 8, 5).unwrap();
        let large = gen_logistic(5, 3, 8, 5).unwrap();
        assert_eq!(small.clients()[1], large.clients()[1]);
    }
}
