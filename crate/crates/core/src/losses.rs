// SPDX-License-Identifier: Apache-2.0

//! Local client objectives: least squares and logistic regression.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// `f(x) = 1/2 ||A x - b||^2`.
///
/// The Gram matrix `A^T A` and `A^T b` are cached at construction since every
/// gradient, prox and closed-form oracle needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    atb: DVector<f64>,
}

impl QuadraticLoss {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_design(&a, &b)?;
        let gram = a.tr_mul(&a);
        let atb = a.tr_mul(&b);
        Ok(Self { a, b, gram, atb })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    /// `A^T A`
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `A^T b`
    pub fn atb(&self) -> &DVector<f64> {
        &self.atb
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        0.5 * r.norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x - &self.atb
    }
}

/// `f(x) = sum_i log(1 + exp(-b_i a_i^T x))` with labels `b_i` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticLoss {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LogisticLoss {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_design(&a, &b)?;
        if let Some(bad) = b.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter(format!(
                "logistic labels must be exactly -1 or +1, found {bad}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.b
    }

    fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.a * x).component_mul(&self.b)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.margins(x).iter().map(|&t| softplus(-t)).sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        // d/dx log(1 + e^{-t}) with t = b a^T x is -b sigma(-t) a
        let weights = self
            .margins(x)
            .zip_map(&self.b, |t, y| -y * sigmoid(-t));
        self.a.tr_mul(&weights)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let curv = self.margins(x).map(|t| sigmoid(t) * sigmoid(-t));
        let mut scaled = self.a.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(curv.iter()) {
            row *= *w;
        }
        self.a.tr_mul(&scaled)
    }
}

fn check_design(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidParameter("design matrix needs n >= 1 and d >= 1".into()));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    Ok(())
}

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    (-t.abs()).exp().ln_1p() + t.max(0.0)
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Strong convexity and smoothness moduli `0 <= ell <= L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityConstants {
    pub ell: f64,
    pub big_l: f64,
}

impl ConvexityConstants {
    pub fn new(ell: f64, big_l: f64) -> Result<Self> {
        if !(ell >= 0.0 && big_l > 0.0 && ell <= big_l) {
            return Err(Error::InvalidParameter(format!(
                "convexity constants need 0 <= ell <= L, L > 0 (got ell={ell}, L={big_l})"
            )));
        }
        Ok(Self { ell, big_l })
    }

    /// `L / ell`; infinite when the loss is not strongly convex.
    pub fn condition_number(&self) -> f64 {
        if self.ell > 0.0 {
            self.big_l / self.ell
        } else {
            f64::INFINITY
        }
    }

    /// FedSplit stepsize `1 / sqrt(ell L)`, defined only for `ell > 0`.
    pub fn fedsplit_stepsize(&self) -> Result<f64> {
        if self.ell > 0.0 {
            Ok(1.0 / (self.ell * self.big_l).sqrt())
        } else {
            Err(Error::InvalidParameter(
                "default FedSplit stepsize 1/sqrt(ell L) needs strongly convex clients; set s explicitly".into(),
            ))
        }
    }

    /// Shift both moduli by a ridge term `lambda/2 ||x - a||^2`.
    pub fn with_ridge(&self, lambda: f64) -> Self {
        Self { ell: self.ell + lambda, big_l: self.big_l + lambda }
    }
}

/// Extreme eigenvalues of a symmetric matrix via a dense eigensolve.
pub fn extreme_eigenvalues(sym: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(sym.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalLoss {
    Quadratic(QuadraticLoss),
    Logistic(LogisticLoss),
}

impl LocalLoss {
    pub fn dim(&self) -> usize {
        self.design().ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.design().nrows()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        match self {
            LocalLoss::Quadratic(q) => q.design(),
            LocalLoss::Logistic(l) => l.design(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            LocalLoss::Quadratic(q) => q.value(x),
            LocalLoss::Logistic(l) => l.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LocalLoss::Quadratic(q) => q.gradient(x),
            LocalLoss::Logistic(l) => l.gradient(x),
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            LocalLoss::Quadratic(q) => q.gram().clone(),
            LocalLoss::Logistic(l) => l.hessian(x),
        }
    }

    /// Quadratic: extreme eigenvalues of `A^T A`. Logistic: `ell = 0` and
    /// `L = lambda_max(A^T A) / 4`, the uniform Hessian bound.
    pub fn convexity_constants(&self) -> ConvexityConstants {
        match self {
            LocalLoss::Quadratic(q) => {
                let (lo, hi) = extreme_eigenvalues(q.gram());
                let big_l = hi.max(f64::MIN_POSITIVE);
                ConvexityConstants { ell: lo.clamp(0.0, big_l), big_l }
            }
            LocalLoss::Logistic(l) => {
                let (_, hi) = extreme_eigenvalues(&l.design().tr_mul(l.design()));
                ConvexityConstants { ell: 0.0, big_l: (hi / 4.0).max(f64::MIN_POSITIVE) }
            }
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticLoss> {
        match self {
            LocalLoss::Quadratic(q) => Some(q),
            LocalLoss::Logistic(_) => None,
        }
    }
}

pub fn loss_value(f: &LocalLoss, x: &DVector<f64>) -> Result<f64> {
    check_dim(f, x)?;
    Ok(f.value(x))
}

pub fn loss_gradient(f: &LocalLoss, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(f, x)?;
    Ok(f.gradient(x))
}

pub fn convexity_constants(f: &LocalLoss) -> ConvexityConstants {
    f.convexity_constants()
}

/// Gradient of the Moreau envelope `M_{sf}` at `x`, i.e. `(x - prox_{sf}(x)) / s`,
/// for whichever prox solver is supplied.
pub fn moreau_gradient<P>(s: f64, x: &DVector<f64>, prox: P) -> Result<DVector<f64>>
where
    P: FnOnce(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("stepsize must be positive, got {s}")));
    }
    let p = prox(x)?;
    Ok((x - p) / s)
}

pub(crate) fn check_dim(f: &LocalLoss, x: &DVector<f64>) -> Result<()> {
    if f.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.len() });
    }
    Ok(())
}
