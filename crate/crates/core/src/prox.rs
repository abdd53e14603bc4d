// SPDX-License-Identifier: Apache-2.0

//! Proximal operators `prox_{sf}(z) = argmin_u { s f(u) + 1/2 ||u - z||^2 }`.
//!
//! Three evaluation routes:
//!
//! * exact: a Cholesky solve of `(I + s A^T A) u = z + s A^T b` for least
//!   squares, damped Newton to tolerance `1e-10` for logistic losses;
//! * inexact gradient: a fixed number of gradient steps on the prox
//!   subproblem with stepsize `alpha = (1 + s (ell + L) / 2)^{-1}`;
//! * inexact Newton: damped Newton with a caller-chosen tolerance.
//!
//! [`ClientProx`] caches the per-client factorization for a fixed stepsize and
//! optionally folds a ridge term `lambda/2 ||u - a||^2` into the loss.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{check_dim, ConvexityConstants, LocalLoss, LogisticLoss, QuadraticLoss};
use crate::newton;

/// Tolerance used when an "exact" prox is requested for a logistic loss.
pub const EXACT_NEWTON_TOL: f64 = 1e-10;
pub const EXACT_NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxMode {
    Exact,
    InexactGradient { steps: usize },
    InexactNewton { tol: f64, max_iter: usize },
}

/// Where the inner gradient solver starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// At the prox argument `2 x - z_j`.
    #[default]
    ProxArgument,
    /// At the current server iterate `x`.
    ServerIterate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxSolverSpec {
    pub mode: ProxMode,
    #[serde(default)]
    pub warm_start: WarmStart,
}

impl Default for ProxSolverSpec {
    fn default() -> Self {
        Self::exact()
    }
}

impl ProxSolverSpec {
    pub fn exact() -> Self {
        Self { mode: ProxMode::Exact, warm_start: WarmStart::default() }
    }

    pub fn inexact_gradient(steps: usize) -> Self {
        Self { mode: ProxMode::InexactGradient { steps }, warm_start: WarmStart::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ProxMode::InexactGradient { steps } if steps < 1 => {
                Err(Error::InvalidParameter("inexact gradient prox needs steps >= 1".into()))
            }
            ProxMode::InexactNewton { tol, max_iter } if !(tol > 0.0) || max_iter < 1 => Err(
                Error::InvalidParameter("inexact Newton prox needs tol > 0 and max_iter >= 1".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, ProxMode::Exact)
    }
}

fn check_stepsize(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("prox stepsize must be positive and finite, got {s}")))
    }
}

fn factor_shifted_gram(f: &QuadraticLoss, s: f64) -> Result<Cholesky<f64, Dyn>> {
    let d = f.gram().nrows();
    let m = DMatrix::identity(d, d) + f.gram() * s;
    m.cholesky()
        .ok_or_else(|| Error::Degenerate("I + s A^T A is not positive definite".into()))
}

/// Exact least-squares prox: `(I + s A^T A)^{-1} (z + s A^T b)`.
pub fn prox_exact_quadratic(f: &QuadraticLoss, s: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_stepsize(s)?;
    if z.len() != f.gram().nrows() {
        return Err(Error::DimensionMismatch { expected: f.gram().nrows(), found: z.len() });
    }
    let chol = factor_shifted_gram(f, s)?;
    Ok(chol.solve(&(z + f.atb() * s)))
}

/// Inner stepsize `alpha = (1 + s (ell + L) / 2)^{-1}` for the gradient prox.
pub fn inexact_step_size(s: f64, constants: &ConvexityConstants) -> f64 {
    1.0 / (1.0 + s * (constants.ell + constants.big_l) / 2.0)
}

/// `steps` gradient iterations on `h(u) = s f(u) + 1/2 ||u - z||^2` starting at `z`.
pub fn prox_inexact_gradient(
    f: &LocalLoss,
    s: f64,
    z: &DVector<f64>,
    steps: usize,
    constants: &ConvexityConstants,
) -> Result<DVector<f64>> {
    prox_inexact_gradient_from(f, s, z, steps, constants, z)
}

/// As [`prox_inexact_gradient`] but with an explicit starting point.
pub fn prox_inexact_gradient_from(
    f: &LocalLoss,
    s: f64,
    z: &DVector<f64>,
    steps: usize,
    constants: &ConvexityConstants,
    start: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_stepsize(s)?;
    check_dim(f, z)?;
    check_dim(f, start)?;
    if steps < 1 {
        return Err(Error::InvalidParameter("inexact gradient prox needs steps >= 1".into()));
    }
    let alpha = inexact_step_size(s, constants);
    Ok(gradient_prox_loop(|u| f.gradient(u), s, z, steps, alpha, start.clone()))
}

fn gradient_prox_loop<G>(
    grad: G,
    s: f64,
    z: &DVector<f64>,
    steps: usize,
    alpha: f64,
    mut u: DVector<f64>,
) -> DVector<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    for _ in 0..steps {
        let gh = grad(&u) * s + &u - z;
        u -= gh * alpha;
    }
    u
}

/// Damped Newton on `h(u) = s f(u) + 1/2 ||u - z||^2` until
/// `||grad h(u)|| <= tol (1 + ||z||)`.
pub fn prox_logistic_newton(
    f: &LogisticLoss,
    s: f64,
    z: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    check_stepsize(s)?;
    if z.len() != f.design().ncols() {
        return Err(Error::DimensionMismatch { expected: f.design().ncols(), found: z.len() });
    }
    newton_prox(|u| f.value(u), |u| f.gradient(u), |u| f.hessian(u), s, z, tol * (1.0 + z.norm()), max_iter)
}

fn newton_prox<V, G, H>(
    value: V,
    grad: G,
    hess: H,
    s: f64,
    center: &DVector<f64>,
    abs_tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>>
where
    V: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
    H: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let d = center.len();
    let out = newton::minimize(center.clone(), abs_tol, max_iter, |u| {
        let diff = u - center;
        let h = s * value(u) + 0.5 * diff.norm_squared();
        let g = grad(u) * s + diff;
        let hm = hess(u) * s + DMatrix::identity(d, d);
        (h, g, hm)
    })?;
    Ok(out.x)
}

/// Exact prox of any local loss: closed form for least squares, Newton to
/// [`EXACT_NEWTON_TOL`] otherwise.
pub fn prox_exact(f: &LocalLoss, s: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    match f {
        LocalLoss::Quadratic(q) => prox_exact_quadratic(q, s, z),
        LocalLoss::Logistic(l) => prox_logistic_newton(l, s, z, EXACT_NEWTON_TOL, EXACT_NEWTON_MAX_ITER),
    }
}

/// Prox with the chosen solver; the gradient route starts at `z`.
pub fn prox_with(
    f: &LocalLoss,
    s: f64,
    z: &DVector<f64>,
    spec: &ProxSolverSpec,
    constants: &ConvexityConstants,
) -> Result<DVector<f64>> {
    spec.validate()?;
    match spec.mode {
        ProxMode::Exact => prox_exact(f, s, z),
        ProxMode::InexactGradient { steps } => prox_inexact_gradient(f, s, z, steps, constants),
        ProxMode::InexactNewton { tol, max_iter } => {
            check_stepsize(s)?;
            check_dim(f, z)?;
            newton_prox(|u| f.value(u), |u| f.gradient(u), |u| f.hessian(u), s, z, tol * (1.0 + z.norm()), max_iter)
        }
    }
}

/// Reflected resolvent `2 prox_{sf}(z) - z`.
pub fn reflected_prox(
    f: &LocalLoss,
    s: f64,
    z: &DVector<f64>,
    spec: &ProxSolverSpec,
    constants: &ConvexityConstants,
) -> Result<DVector<f64>> {
    let p = prox_with(f, s, z, spec, constants)?;
    Ok(p * 2.0 - z)
}

/// Moreau-envelope gradient `(x - prox_{sf}(x)) / s` with the exact prox.
pub fn moreau_gradient_exact(f: &LocalLoss, s: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    crate::losses::moreau_gradient(s, x, |v| prox_exact(f, s, v))
}

/// Ridge term `lambda/2 ||u - anchor||^2` added to a client loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub lambda: f64,
    pub anchor: DVector<f64>,
}

/// Per-client prox operator for a fixed stepsize, with cached factorization.
///
/// With a ridge, `prox_{s(f + ridge)}(w) = prox_{s' f}(c)` where
/// `s' = s / (1 + s lambda)` and `c = (w + s lambda a) / (1 + s lambda)`.
#[derive(Debug, Clone)]
pub struct ClientProx<'a> {
    loss: &'a LocalLoss,
    s: f64,
    spec: ProxSolverSpec,
    /// Constants of the (possibly ridge-shifted) loss, used for the inner stepsize.
    constants: ConvexityConstants,
    ridge: Option<Ridge>,
    inner_s: f64,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl<'a> ClientProx<'a> {
    pub fn new(
        loss: &'a LocalLoss,
        s: f64,
        spec: ProxSolverSpec,
        constants: ConvexityConstants,
        ridge: Option<Ridge>,
    ) -> Result<Self> {
        check_stepsize(s)?;
        spec.validate()?;
        if let Some(r) = &ridge {
            if !(r.lambda >= 0.0) {
                return Err(Error::InvalidParameter(format!("ridge lambda must be >= 0, got {}", r.lambda)));
            }
            check_dim(loss, &r.anchor)?;
        }
        let inner_s = match &ridge {
            Some(r) => s / (1.0 + s * r.lambda),
            None => s,
        };
        let factor = match loss {
            LocalLoss::Quadratic(q) => Some(factor_shifted_gram(q, inner_s)?),
            LocalLoss::Logistic(_) => None,
        };
        let constants = match &ridge {
            Some(r) => constants.with_ridge(r.lambda),
            None => constants,
        };
        Ok(Self { loss, s, spec, constants, ridge, inner_s, factor })
    }

    pub fn stepsize(&self) -> f64 {
        self.s
    }

    pub fn spec(&self) -> &ProxSolverSpec {
        &self.spec
    }

    /// True when an exact closed-form reference is available for residuals.
    pub fn has_closed_form(&self) -> bool {
        self.factor.is_some()
    }

    fn fold(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.ridge {
            Some(r) => {
                let sl = self.s * r.lambda;
                (w + &r.anchor * sl) / (1.0 + sl)
            }
            None => w.clone(),
        }
    }

    fn shifted_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let g = self.loss.gradient(u);
        match &self.ridge {
            Some(r) => g + (u - &r.anchor) * r.lambda,
            None => g,
        }
    }

    /// Exact prox of the (shifted) loss at `w`.
    pub fn exact(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.loss, w)?;
        let c = self.fold(w);
        match (self.loss, &self.factor) {
            (LocalLoss::Quadratic(q), Some(chol)) => Ok(chol.solve(&(c + q.atb() * self.inner_s))),
            _ => self.newton(&c, EXACT_NEWTON_TOL * (1.0 + w.norm()), EXACT_NEWTON_MAX_ITER),
        }
    }

    fn newton(&self, c: &DVector<f64>, abs_tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        let f = self.loss;
        newton_prox(|u| f.value(u), |u| f.gradient(u), |u| f.hessian(u), self.inner_s, c, abs_tol, max_iter)
    }

    /// Prox at `w` with the configured solver; `server` is the current server
    /// iterate, used only for [`WarmStart::ServerIterate`].
    pub fn apply(&self, w: &DVector<f64>, server: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.loss, w)?;
        match self.spec.mode {
            ProxMode::Exact => self.exact(w),
            ProxMode::InexactGradient { steps } => {
                let start = match self.spec.warm_start {
                    WarmStart::ProxArgument => w.clone(),
                    WarmStart::ServerIterate => server.clone(),
                };
                let alpha = inexact_step_size(self.s, &self.constants);
                Ok(gradient_prox_loop(|u| self.shifted_gradient(u), self.s, w, steps, alpha, start))
            }
            ProxMode::InexactNewton { tol, max_iter } => {
                let c = self.fold(w);
                self.newton(&c, tol * (1.0 + w.norm()), max_iter)
            }
        }
    }
}
