// SPDX-License-Identifier: Apache-2.0

//! Round-based federated procedures over a [`FederatedProblem`].
//!
//! Every run records the server iterate `x^(1)` (the initialization) and then
//! one record after each of the `T` rounds, so a trace has `T + 1` records and
//! its last record is `x^(T+1)`. Runs always execute the full round budget
//! unless [`RunOptions::stop_below_gap`] is set.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::ReferenceSolution;
use crate::blockvec::BlockVector;
use crate::error::{Error, Result};
use crate::prox::{ClientProx, ProxSolverSpec, Ridge};
use crate::problem::FederatedProblem;
use crate::trace::{RoundRecord, Trace, TraceMeta};

/// Abort when the cost grows beyond this multiple of the initial cost.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
/// Default FedProx stepsize.
pub const DEFAULT_FEDPROX_STEPSIZE: f64 = 1.0;
/// Gradient-norm tolerance of the centralized pre-solve that estimates `||x^(1) - x*||`.
pub const LAMBDA_PRESOLVE_TOL: f64 = 1e-2;
const LAMBDA_PRESOLVE_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgorithmKind {
    /// `e` local gradient steps with stepsize `s` (default `1/L*`), then averaging.
    Fedgd { s: Option<f64>, e: usize },
    /// One exact local prox step with stepsize `s` (default 1), then averaging.
    Fedprox { s: Option<f64> },
    /// Peaceman–Rachford splitting; `s` defaults to `1/sqrt(ell* L*)`.
    Fedsplit { s: Option<f64>, prox: ProxSolverSpec },
    /// FedSplit on `f_j + lambda/2 ||x - x^(1)||^2` with exact prox.
    FedsplitRegularized { eps: f64, lambda_override: Option<f64> },
}

/// Serialized form: a flat object such as
/// `{"method": "fedgd", "s": 0.05, "e": 10, "rounds": 500}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgorithmFile", into = "AlgorithmFile")]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub rounds: usize,
    /// Initial server iterate; zero when absent.
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fedgd,
    Fedprox,
    Fedsplit,
    FedsplitRegularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgorithmFile {
    method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prox: Option<ProxSolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_override: Option<f64>,
    rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<Vec<f64>>,
}

impl TryFrom<AlgorithmFile> for AlgorithmSpec {
    type Error = String;

    fn try_from(f: AlgorithmFile) -> std::result::Result<Self, String> {
        let unused = |name: &str, present: bool| {
            if present {
                Err(format!("field `{name}` does not apply to method {:?}", f.method))
            } else {
                Ok(())
            }
        };
        let kind = match f.method {
            Method::Fedgd => {
                unused("prox", f.prox.is_some())?;
                unused("eps", f.eps.is_some())?;
                unused("lambda_override", f.lambda_override.is_some())?;
                let e = f.e.ok_or("method fedgd needs `e`")?;
                AlgorithmKind::Fedgd { s: f.s, e }
            }
            Method::Fedprox => {
                unused("e", f.e.is_some())?;
                unused("prox", f.prox.is_some())?;
                unused("eps", f.eps.is_some())?;
                unused("lambda_override", f.lambda_override.is_some())?;
                AlgorithmKind::Fedprox { s: f.s }
            }
            Method::Fedsplit => {
                unused("e", f.e.is_some())?;
                unused("eps", f.eps.is_some())?;
                unused("lambda_override", f.lambda_override.is_some())?;
                AlgorithmKind::Fedsplit { s: f.s, prox: f.prox.unwrap_or_default() }
            }
            Method::FedsplitRegularized => {
                unused("s", f.s.is_some())?;
                unused("e", f.e.is_some())?;
                unused("prox", f.prox.is_some())?;
                let eps = f.eps.ok_or("method fedsplit_regularized needs `eps`")?;
                AlgorithmKind::FedsplitRegularized { eps, lambda_override: f.lambda_override }
            }
        };
        let spec = AlgorithmSpec { kind, rounds: f.rounds, init: f.init };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<AlgorithmSpec> for AlgorithmFile {
    fn from(spec: AlgorithmSpec) -> Self {
        let mut f = AlgorithmFile {
            method: Method::Fedgd,
            s: None,
            e: None,
            prox: None,
            eps: None,
            lambda_override: None,
            rounds: spec.rounds,
            init: spec.init,
        };
        match spec.kind {
            AlgorithmKind::Fedgd { s, e } => {
                f.s = s;
                f.e = Some(e);
            }
            AlgorithmKind::Fedprox { s } => {
                f.method = Method::Fedprox;
                f.s = s;
            }
            AlgorithmKind::Fedsplit { s, prox } => {
                f.method = Method::Fedsplit;
                f.s = s;
                f.prox = Some(prox);
            }
            AlgorithmKind::FedsplitRegularized { eps, lambda_override } => {
                f.method = Method::FedsplitRegularized;
                f.eps = Some(eps);
                f.lambda_override = lambda_override;
            }
        }
        f
    }
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind, rounds: usize) -> Self {
        Self { kind, rounds, init: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::InvalidParameter("rounds must be >= 1".into()));
        }
        let bad_s = |s: Option<f64>| matches!(s, Some(v) if !(v > 0.0 && v.is_finite()));
        match self.kind {
            AlgorithmKind::Fedgd { s, e } => {
                if bad_s(s) {
                    return Err(Error::InvalidParameter("FedGD stepsize must be > 0".into()));
                }
                if e < 1 {
                    return Err(Error::InvalidParameter("FedGD needs e >= 1".into()));
                }
            }
            AlgorithmKind::Fedprox { s } if bad_s(s) => {
                return Err(Error::InvalidParameter("FedProx stepsize must be > 0".into()));
            }
            AlgorithmKind::Fedsplit { s, prox } => {
                if bad_s(s) {
                    return Err(Error::InvalidParameter("FedSplit stepsize must be > 0".into()));
                }
                prox.validate()?;
            }
            AlgorithmKind::FedsplitRegularized { eps, lambda_override } => {
                if !(eps > 0.0) {
                    return Err(Error::InvalidParameter("regularized FedSplit needs eps > 0".into()));
                }
                if matches!(lambda_override, Some(l) if !(l > 0.0)) {
                    return Err(Error::InvalidParameter("lambda override must be > 0".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Short identifier used for output file names.
    pub fn label(&self) -> String {
        use crate::prox::ProxMode;
        match self.kind {
            AlgorithmKind::Fedgd { e, .. } => format!("fedgd_e{e}"),
            AlgorithmKind::Fedprox { .. } => "fedprox".into(),
            AlgorithmKind::Fedsplit { prox, .. } => match prox.mode {
                ProxMode::Exact => "fedsplit_exact".into(),
                ProxMode::InexactGradient { steps } => format!("fedsplit_grad_e{steps}"),
                ProxMode::InexactNewton { .. } => "fedsplit_newton".into(),
            },
            AlgorithmKind::FedsplitRegularized { .. } => "fedsplit_regularized".into(),
        }
    }

    pub fn init_point(&self, d: usize) -> Result<DVector<f64>> {
        match &self.init {
            Some(v) if v.len() != d => Err(Error::DimensionMismatch { expected: d, found: v.len() }),
            Some(v) => Ok(DVector::from_column_slice(v)),
            None => Ok(DVector::zeros(d)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    pub rounds: usize,
    /// Initial server iterate; zero when absent.
    pub init: Option<DVector<f64>>,
    /// Reference optimum for the `gap` and `dist_to_ref` columns.
    pub reference: Option<&'a ReferenceSolution>,
    /// Stop after the first record whose gap is at most this value.
    pub stop_below_gap: Option<f64>,
    /// Evaluate client updates on the rayon pool. Results are identical either way.
    pub parallel_clients: bool,
    pub seed: Option<u64>,
}

impl<'a> RunOptions<'a> {
    pub fn rounds(rounds: usize) -> Self {
        Self { rounds, ..Default::default() }
    }

    pub fn with_reference(mut self, reference: &'a ReferenceSolution) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_init(mut self, init: DVector<f64>) -> Self {
        self.init = Some(init);
        self
    }

    fn init_point(&self, problem: &FederatedProblem) -> Result<DVector<f64>> {
        match &self.init {
            Some(x) => {
                problem.check_point(x)?;
                Ok(x.clone())
            }
            None => Ok(DVector::zeros(problem.dim())),
        }
    }
}

/// Builds records and enforces the divergence guard.
struct Recorder<'p, 'a> {
    problem: &'p FederatedProblem,
    reference: Option<&'a ReferenceSolution>,
    stop_below_gap: Option<f64>,
    records: Vec<RoundRecord>,
    initial_cost: f64,
}

impl<'p, 'a> Recorder<'p, 'a> {
    fn new(problem: &'p FederatedProblem, opts: &RunOptions<'a>, x1: &DVector<f64>) -> Self {
        let mut rec = Self {
            problem,
            reference: opts.reference,
            stop_below_gap: opts.stop_below_gap,
            records: Vec::with_capacity(opts.rounds.saturating_add(1).min(1 << 20)),
            initial_cost: 0.0,
        };
        let first = rec.make(1, x1);
        rec.initial_cost = first.cost;
        rec.records.push(first);
        rec
    }

    fn make(&self, t: usize, x: &DVector<f64>) -> RoundRecord {
        let cost = self.problem.cost(x);
        RoundRecord {
            t,
            x: x.clone(),
            cost,
            grad_norm: self.problem.gradient(x).norm(),
            gap: self.reference.map(|r| cost - r.f_star),
            dist_to_ref: self.reference.map(|r| (x - &r.x_star).norm()),
            prox_residual: None,
            prox_residual_max: None,
        }
    }

    /// Records `x^(t)`; returns `Ok(true)` when the run should stop early.
    fn push(&mut self, t: usize, x: &DVector<f64>) -> Result<bool> {
        let rec = self.make(t, x);
        let limit = DIVERGENCE_FACTOR * self.initial_cost.max(f64::EPSILON);
        if !rec.cost.is_finite() || rec.cost > limit {
            return Err(Error::Diverged { round: t - 1, cost: rec.cost, initial: self.initial_cost });
        }
        self.records.push(rec);
        Ok(self.reached_target())
    }

    fn reached_target(&self) -> bool {
        match (self.stop_below_gap, self.records.last().and_then(|r| r.gap)) {
            (Some(target), Some(gap)) => gap <= target,
            _ => false,
        }
    }

    fn finish(self, meta: TraceMeta) -> Trace {
        Trace { records: self.records, meta }
    }
}

fn meta(label: String, spec: Option<AlgorithmSpec>, stepsize: f64, opts: &RunOptions) -> TraceMeta {
    TraceMeta {
        label,
        spec,
        stepsize,
        lambda: None,
        seed: opts.seed,
        f_star: opts.reference.map(|r| r.f_star),
        wall_ms: 0,
    }
}

fn check_stepsize(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("stepsize must be positive and finite, got {s}")))
    }
}

fn map_clients<T, F>(m: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..m).into_par_iter().map(f).collect()
    } else {
        (0..m).map(f).collect()
    }
}

/// Sum in ascending client order, divided by `m`.
fn average(vs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(vs[0].len());
    for v in vs {
        acc += v;
    }
    acc / vs.len() as f64
}

/// FedGD: `x_j <- G_j^e(x)` with `G_j(x) = x - s grad f_j(x)`, then `x <- mean_j x_j`.
pub fn run_fedgd(problem: &FederatedProblem, s: f64, e: usize, opts: &RunOptions) -> Result<Trace> {
    check_stepsize(s)?;
    if e < 1 {
        return Err(Error::InvalidParameter("FedGD needs e >= 1".into()));
    }
    let start = Instant::now();
    let mut x = opts.init_point(problem)?;
    let mut rec = Recorder::new(problem, opts, &x);
    if !rec.reached_target() {
        for round in 1..=opts.rounds {
            let locals = map_clients(problem.num_clients(), opts.parallel_clients, |j| {
                let f = &problem.clients()[j];
                let mut y = x.clone();
                for _ in 0..e {
                    y -= f.gradient(&y) * s;
                }
                Ok(y)
            })?;
            x = average(&locals);
            if rec.push(round + 1, &x)? {
                break;
            }
        }
    }
    let mut m = meta(format!("fedgd_e{e}"), None, s, opts);
    m.wall_ms = start.elapsed().as_millis();
    Ok(rec.finish(m))
}

/// FedProx: `x_j <- prox_{s f_j}(x)` (exact), then `x <- mean_j x_j`.
pub fn run_fedprox(problem: &FederatedProblem, s: f64, opts: &RunOptions) -> Result<Trace> {
    check_stepsize(s)?;
    let start = Instant::now();
    let proxes = problem
        .clients()
        .iter()
        .map(|f| ClientProx::new(f, s, ProxSolverSpec::exact(), f.convexity_constants(), None))
        .collect::<Result<Vec<_>>>()?;
    let mut x = opts.init_point(problem)?;
    let mut rec = Recorder::new(problem, opts, &x);
    if !rec.reached_target() {
        for round in 1..=opts.rounds {
            let locals = map_clients(problem.num_clients(), opts.parallel_clients, |j| {
                proxes[j]
                    .exact(&x)
                    .map_err(|e| Error::Round { round, client: j, source: Box::new(e) })
            })?;
            x = average(&locals);
            if rec.push(round + 1, &x)? {
                break;
            }
        }
    }
    let mut m = meta("fedprox".into(), None, s, opts);
    m.wall_ms = start.elapsed().as_millis();
    Ok(rec.finish(m))
}

/// Residual of one FedSplit round against the exact prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundResidual {
    /// `||r^(t)||` on the product space.
    pub block_norm: f64,
    /// `max_j ||r_j^(t)||`
    pub max_client: f64,
}

/// FedSplit state machine. Each [`FedSplit::step`] performs one round:
///
/// 1. `z_j^(t+1/2) = prox_update_j(2 x^(t) - z_j^(t))`
/// 2. `z_j^(t+1) = z_j^(t) + 2 (z_j^(t+1/2) - x^(t))`
/// 3. `x^(t+1) = mean_j z_j^(t+1)`
pub struct FedSplit<'a> {
    proxes: Vec<ClientProx<'a>>,
    z: BlockVector,
    x: DVector<f64>,
    round: usize,
    measure_residuals: bool,
    parallel: bool,
}

impl<'a> FedSplit<'a> {
    pub fn new(
        problem: &'a FederatedProblem,
        s: f64,
        prox: ProxSolverSpec,
        init: DVector<f64>,
    ) -> Result<Self> {
        Self::with_ridge(problem, s, prox, init, None)
    }

    /// FedSplit on the losses `f_j + lambda/2 ||x - anchor||^2`.
    pub fn with_ridge(
        problem: &'a FederatedProblem,
        s: f64,
        prox: ProxSolverSpec,
        init: DVector<f64>,
        ridge: Option<Ridge>,
    ) -> Result<Self> {
        check_stepsize(s)?;
        problem.check_point(&init)?;
        // The inner gradient stepsize uses the problem-level (ell*, L*).
        let constants = problem.constants();
        let proxes = problem
            .clients()
            .iter()
            .map(|f| ClientProx::new(f, s, prox, constants, ridge.clone()))
            .collect::<Result<Vec<_>>>()?;
        let z = BlockVector::broadcast(&init, problem.num_clients())?;
        Ok(Self { proxes, z, x: init, round: 0, measure_residuals: true, parallel: false })
    }

    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    /// Disable the extra exact solve used to measure inexact-prox residuals.
    pub fn measure_residuals(mut self, on: bool) -> Self {
        self.measure_residuals = on;
        self
    }

    pub fn server(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn blocks(&self) -> &BlockVector {
        &self.z
    }

    pub fn rounds_done(&self) -> usize {
        self.round
    }

    /// Runs one round; returns the prox residual when it can be measured
    /// (closed-form exact prox available).
    pub fn step(&mut self) -> Result<Option<RoundResidual>> {
        let round = self.round + 1;
        let x = &self.x;
        let z = &self.z;
        let proxes = &self.proxes;
        let measure = self.measure_residuals;
        let results = map_clients(proxes.len(), self.parallel, |j| {
            let op = &proxes[j];
            let zj = z.block(j).into_owned();
            let arg = x * 2.0 - &zj;
            let wrap = |e| Error::Round { round, client: j, source: Box::new(e) };
            let half = op.apply(&arg, x).map_err(wrap)?;
            let resid = if !op.has_closed_form() {
                None
            } else if op.spec().is_exact() {
                Some(0.0)
            } else if measure {
                Some((&half - op.exact(&arg).map_err(wrap)?).norm())
            } else {
                None
            };
            let next = zj + (half - x) * 2.0;
            Ok((next, resid))
        })?;
        let mut residuals = Vec::with_capacity(results.len());
        for (j, (next, resid)) in results.into_iter().enumerate() {
            self.z.set_block(j, &next);
            residuals.push(resid);
        }
        self.x = self.z.average();
        self.round = round;
        let measured: Option<Vec<f64>> = residuals.into_iter().collect();
        Ok(measured.map(|rs| RoundResidual {
            block_norm: rs.iter().map(|r| r * r).sum::<f64>().sqrt(),
            max_client: rs.iter().copied().fold(0.0, f64::max),
        }))
    }
}

fn drive_fedsplit(
    problem: &FederatedProblem,
    mut solver: FedSplit,
    opts: &RunOptions,
    x1: &DVector<f64>,
) -> Result<Vec<RoundRecord>> {
    let mut rec = Recorder::new(problem, opts, x1);
    if !rec.reached_target() {
        for round in 1..=opts.rounds {
            let resid = solver.step()?;
            if let (Some(r), Some(last)) = (resid, rec.records.last_mut()) {
                last.prox_residual = Some(r.block_norm);
                last.prox_residual_max = Some(r.max_client);
            }
            if rec.push(round + 1, solver.server())? {
                break;
            }
        }
    }
    Ok(rec.records)
}

pub fn run_fedsplit(
    problem: &FederatedProblem,
    s: f64,
    prox: ProxSolverSpec,
    opts: &RunOptions,
) -> Result<Trace> {
    let start = Instant::now();
    let x1 = opts.init_point(problem)?;
    let solver = FedSplit::new(problem, s, prox, x1.clone())?.parallel(opts.parallel_clients);
    let records = drive_fedsplit(problem, solver, opts, &x1)?;
    let label = AlgorithmSpec::new(AlgorithmKind::Fedsplit { s: Some(s), prox }, 1).label();
    let mut m = meta(label, None, s, opts);
    m.wall_ms = start.elapsed().as_millis();
    Ok(Trace { records, meta: m })
}

/// Estimate of `||x1 - x*||` from centralized gradient descent stopped at
/// `||grad F|| <= LAMBDA_PRESOLVE_TOL`.
pub fn estimate_initial_distance(problem: &FederatedProblem, x1: &DVector<f64>) -> f64 {
    let step = 1.0 / (problem.num_clients() as f64 * problem.constants().big_l);
    let mut x = x1.clone();
    for _ in 0..LAMBDA_PRESOLVE_MAX_ITER {
        let g = problem.gradient(&x);
        if g.norm() <= LAMBDA_PRESOLVE_TOL {
            break;
        }
        x -= g * step;
    }
    (x - x1).norm()
}

/// `lambda = eps / (2 m est^2)`, half the upper end of the admissible interval
/// `(0, eps / (m ||x1 - x*||^2))`.
pub fn default_lambda(eps: f64, m: usize, distance_estimate: f64) -> f64 {
    let est2 = (distance_estimate * distance_estimate).max(f64::MIN_POSITIVE);
    eps / (2.0 * m as f64 * est2)
}

/// FedSplit on `F_lambda(x) = sum_j { f_j(x) + lambda/2 ||x - x^(1)||^2 }` with
/// exact prox and stepsize `1/sqrt(lambda (L* + lambda))`. Trace costs and gaps
/// refer to the unregularized `F`.
pub fn run_fedsplit_regularized(
    problem: &FederatedProblem,
    eps: f64,
    lambda_override: Option<f64>,
    opts: &RunOptions,
) -> Result<Trace> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    let start = Instant::now();
    let x1 = opts.init_point(problem)?;
    let lambda = match lambda_override {
        Some(l) if l > 0.0 => l,
        Some(l) => return Err(Error::InvalidParameter(format!("lambda must be > 0, got {l}"))),
        None => default_lambda(eps, problem.num_clients(), estimate_initial_distance(problem, &x1)),
    };
    let big_l = problem.constants().big_l;
    let s = 1.0 / (lambda * (big_l + lambda)).sqrt();
    let ridge = Ridge { lambda, anchor: x1.clone() };
    let solver = FedSplit::with_ridge(problem, s, ProxSolverSpec::exact(), x1.clone(), Some(ridge))?
        .parallel(opts.parallel_clients);
    let records = drive_fedsplit(problem, solver, opts, &x1)?;
    let mut m = meta("fedsplit_regularized".into(), None, s, opts);
    m.lambda = Some(lambda);
    m.wall_ms = start.elapsed().as_millis();
    Ok(Trace { records, meta: m })
}

/// Resolves default stepsizes and runs `spec`. `reference` feeds the gap columns.
pub fn run(
    problem: &FederatedProblem,
    spec: &AlgorithmSpec,
    reference: Option<&ReferenceSolution>,
    seed: Option<u64>,
) -> Result<Trace> {
    run_with(problem, spec, reference, seed, None)
}

pub fn run_with(
    problem: &FederatedProblem,
    spec: &AlgorithmSpec,
    reference: Option<&ReferenceSolution>,
    seed: Option<u64>,
    stop_below_gap: Option<f64>,
) -> Result<Trace> {
    spec.validate()?;
    let opts = RunOptions {
        rounds: spec.rounds,
        init: Some(spec.init_point(problem.dim())?),
        reference,
        stop_below_gap,
        parallel_clients: false,
        seed,
    };
    let mut trace = match spec.kind {
        AlgorithmKind::Fedgd { s, e } => {
            let s = match s {
                Some(s) => s,
                None => 1.0 / problem.constants().big_l,
            };
            run_fedgd(problem, s, e, &opts)?
        }
        AlgorithmKind::Fedprox { s } => run_fedprox(problem, s.unwrap_or(DEFAULT_FEDPROX_STEPSIZE), &opts)?,
        AlgorithmKind::Fedsplit { s, prox } => {
            let s = match s {
                Some(s) => s,
                None => problem.constants().fedsplit_stepsize()?,
            };
            run_fedsplit(problem, s, prox, &opts)?
        }
        AlgorithmKind::FedsplitRegularized { eps, lambda_override } => {
            run_fedsplit_regularized(problem, eps, lambda_override, &opts)?
        }
    };
    trace.meta.label = spec.label();
    trace.meta.spec = Some(spec.clone());
    Ok(trace)
}
