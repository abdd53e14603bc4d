// SPDX-License-Identifier: Apache-2.0

//! Experiment drivers: non-convergence of FedGD/FedProx, the conditioning
//! study, inexact-prox floors and the logistic comparison.
//!
//! Each driver computes everything first and only then writes files, so a
//! failed run leaves no partial outputs behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{self, AlgorithmKind, AlgorithmSpec};
use crate::analysis::{
    self, contraction_rate, fedgd_limit_lsq, fedprox_limit_lsq, fit_loglog, fixedpoint_residuals,
    iteration_complexity, lsq_optimum, FixedPointResiduals, LineFit, ReferenceSolution,
};
use crate::datagen::{EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::losses::extreme_eigenvalues;
use crate::problem::FederatedProblem;
use crate::prox::{ProxMode, ProxSolverSpec};
use crate::trace::Trace;

/// Tolerance for the reference optimum used by all experiments.
pub const REFERENCE_TOL: f64 = 1e-12;
pub const DEFAULT_EPS_TARGET: f64 = 1e-3;
/// Round cap for the conditioning study.
pub const STUDY_ROUND_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Nonconvergence,
    Conditioning,
    InexactFloor,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Chosen from the ensemble and subcommand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub ensemble: EnsembleKind,
    #[serde(default)]
    pub seed: u64,
    /// Per-experiment defaults are used when empty.
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_eps")]
    pub eps_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_grid: Option<Vec<f64>>,
    /// Overrides the round count of every algorithm (the round cap for the study).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_eps() -> f64 {
    DEFAULT_EPS_TARGET
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleKind, seed: u64) -> Self {
        Self {
            experiment: None,
            ensemble,
            seed,
            algorithms: Vec::new(),
            eps_target: DEFAULT_EPS_TARGET,
            kappa_grid: None,
            rounds: None,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.eps_target > 0.0) {
            return Err(Error::Config(format!("eps_target must be > 0, got {}", self.eps_target)));
        }
        if self.rounds == Some(0) {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        for spec in &self.algorithms {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(grid) = &self.kappa_grid {
            if grid.is_empty() || grid.iter().any(|k| !(*k >= 1.0) || !k.is_finite()) {
                return Err(Error::Config("kappa_grid must be a nonempty list of values >= 1".into()));
            }
        }
        Ok(())
    }

    /// The experiment to run for the `floors` subcommand when none is named.
    pub fn floors_experiment(&self) -> ExperimentKind {
        match self.experiment {
            Some(kind) => kind,
            None if self.ensemble.is_least_squares() => ExperimentKind::InexactFloor,
            None => ExperimentKind::Logistic,
        }
    }

    fn problem(&self) -> Result<FederatedProblem> {
        EnsembleSpec { kind: self.ensemble, seed: self.seed }.generate()
    }

    /// Configured algorithms (or `defaults`), with the round override applied.
    fn algorithms_or(&self, defaults: Vec<AlgorithmSpec>) -> Result<Vec<AlgorithmSpec>> {
        let mut specs = if self.algorithms.is_empty() { defaults } else { self.algorithms.clone() };
        if let Some(r) = self.rounds {
            for s in &mut specs {
                s.rounds = r;
            }
        }
        if specs.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        Ok(specs)
    }
}

fn require_least_squares(config: &ExperimentConfig, what: &str) -> Result<()> {
    if config.ensemble.is_least_squares() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} needs a least-squares ensemble")))
    }
}

/// Traces plus the experiment's report, written by [`ExperimentOutput::write`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput<R> {
    pub traces: Vec<Trace>,
    pub report: R,
    pub report_name: &'static str,
}

/// File stems for a list of labels, suffixing repeats with `_2`, `_3`, ...
fn unique_stems<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    labels
        .map(|l| {
            let n = seen.entry(l).or_insert(0);
            *n += 1;
            if *n == 1 {
                l.to_string()
            } else {
                format!("{l}_{n}")
            }
        })
        .collect()
}

impl<R: Serialize> ExperimentOutput<R> {
    /// Writes traces and the report into `dir`; returns the file names.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let report = jsonfmt::to_vec(&self.report)?;
        let stems = unique_stems(self.traces.iter().map(|t| t.meta.label.as_str()));
        let mut files = Vec::with_capacity(2 * self.traces.len() + 1);
        for (trace, stem) in self.traces.iter().zip(&stems) {
            files.push((format!("{stem}.csv"), trace.to_csv()?));
            files.push((format!("{stem}.json"), trace.sidecar_json()?));
        }
        files.push((self.report_name.to_string(), report));
        fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(files.len());
        for (name, bytes) in files {
            fs::write(dir.join(&name), bytes)?;
            names.push(name);
        }
        Ok(names)
    }
}

fn run_spec(
    problem: &FederatedProblem,
    spec: &AlgorithmSpec,
    reference: &ReferenceSolution,
    seed: u64,
) -> Result<Trace> {
    algorithms::run(problem, spec, Some(reference), Some(seed))
}

// ---------------------------------------------------------------------------
// Non-convergence of FedGD / FedProx

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorComparison {
    pub label: String,
    pub stepsize: f64,
    pub terminal_gap: f64,
    /// `F(x_alg) - F*` at the closed-form limit of the algorithm.
    pub predicted_floor: f64,
    /// `|terminal_gap - predicted_floor| / predicted_floor`; absent when the
    /// predicted floor is at rounding level.
    pub relative_error: Option<f64>,
    pub dist_to_limit: f64,
    pub dist_to_optimum: f64,
    pub limit: Vec<f64>,
    /// Residuals at the terminal iterate, with `e` taken from the algorithm (1 otherwise).
    pub residuals: FixedPointResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonconvergenceReport {
    pub seed: u64,
    pub f_star: f64,
    pub x_star: Vec<f64>,
    pub rows: Vec<FloorComparison>,
}

fn default_nonconvergence_algorithms(rounds: usize) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::new(AlgorithmKind::Fedgd { s: None, e: 1 }, rounds),
        AlgorithmSpec::new(AlgorithmKind::Fedgd { s: None, e: 10 }, rounds),
        AlgorithmSpec::new(AlgorithmKind::Fedgd { s: None, e: 100 }, rounds),
        AlgorithmSpec::new(AlgorithmKind::Fedprox { s: None }, rounds),
        AlgorithmSpec::new(AlgorithmKind::Fedsplit { s: None, prox: ProxSolverSpec::exact() }, rounds),
    ]
}

pub fn run_nonconvergence_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput<NonconvergenceReport>> {
    config.validate()?;
    require_least_squares(config, "the non-convergence experiment")?;
    let problem = config.problem()?;
    let reference = analysis::reference_optimum(&problem, REFERENCE_TOL)?;
    let specs = config.algorithms_or(default_nonconvergence_algorithms(3000))?;
    let traces = specs
        .par_iter()
        .map(|spec| run_spec(&problem, spec, &reference, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(traces.len());
    for (spec, trace) in specs.iter().zip(&traces) {
        let s = trace.meta.stepsize;
        let (limit, e) = match spec.kind {
            AlgorithmKind::Fedgd { e, .. } => (fedgd_limit_lsq(&problem, s, e)?, e),
            AlgorithmKind::Fedprox { .. } => (fedprox_limit_lsq(&problem, s)?, 1),
            _ => (lsq_optimum(&problem)?, 1),
        };
        let predicted_floor = problem.cost(&limit) - reference.f_star;
        let terminal_gap = trace.last().cost - reference.f_star;
        let floor_scale = 1e-12 * (1.0 + reference.f_star.abs());
        let relative_error = (predicted_floor > floor_scale)
            .then(|| (terminal_gap - predicted_floor).abs() / predicted_floor);
        rows.push(FloorComparison {
            label: trace.meta.label.clone(),
            stepsize: s,
            terminal_gap,
            predicted_floor,
            relative_error,
            dist_to_limit: (trace.final_x() - &limit).norm(),
            dist_to_optimum: (trace.final_x() - &reference.x_star).norm(),
            residuals: fixedpoint_residuals(&problem, s, e, trace.final_x())?,
            limit: limit.as_slice().to_vec(),
        });
    }
    Ok(ExperimentOutput {
        traces,
        report: NonconvergenceReport {
            seed: config.seed,
            f_star: reference.f_star,
            x_star: reference.x_star.as_slice().to_vec(),
            rows,
        },
        report_name: "floors.json",
    })
}

// ---------------------------------------------------------------------------
// Conditioning study

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub algorithm: String,
    pub kappa: f64,
    pub seed: u64,
    /// First round index with gap at most `eps_target`; absent when censored.
    pub t_hit: Option<usize>,
    pub final_gap: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub algorithm: String,
    pub fit: Option<LineFit>,
    /// Rows excluded from the fit because the target was not reached.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub eps_target: f64,
    pub round_cap: usize,
    /// Sorted by kappa, then by algorithm order in the config.
    pub rows: Vec<StudyRow>,
    pub fits: Vec<SlopeFit>,
}

impl StudyReport {
    pub fn t_hit(&self, algorithm: &str, kappa: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.kappa == kappa).and_then(|r| r.t_hit)
    }

    pub fn slope(&self, algorithm: &str) -> Option<f64> {
        self.fits.iter().find(|f| f.algorithm == algorithm).and_then(|f| f.fit).map(|f| f.slope)
    }
}

fn default_study_algorithms(cap: usize) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::new(AlgorithmKind::Fedgd { s: None, e: 1 }, cap),
        AlgorithmSpec::new(AlgorithmKind::Fedsplit { s: None, prox: ProxSolverSpec::exact() }, cap),
    ]
}

/// For each kappa in the grid (instance seed `seed + index`), runs every
/// algorithm until the gap first drops to `eps_target` or the round cap.
/// Cells run in parallel; traces stop at the first hit.
pub fn run_conditioning_study(config: &ExperimentConfig) -> Result<ExperimentOutput<StudyReport>> {
    config.validate()?;
    if !matches!(config.ensemble, EnsembleKind::ConditionedLsq { .. }) {
        return Err(Error::Config("the conditioning study needs a conditioned_lsq ensemble".into()));
    }
    let mut grid = config
        .kappa_grid
        .clone()
        .ok_or_else(|| Error::Config("the conditioning study needs kappa_grid".into()))?;
    grid.sort_by(f64::total_cmp);
    let cap = config.rounds.unwrap_or(STUDY_ROUND_CAP);
    let specs = config.algorithms_or(default_study_algorithms(cap))?;

    let instances = grid
        .par_iter()
        .enumerate()
        .map(|(i, &kappa)| {
            let seed = config.seed.wrapping_add(i as u64);
            let problem = EnsembleSpec { kind: config.ensemble.with_kappa(kappa)?, seed }.generate()?;
            let reference = analysis::reference_optimum(&problem, REFERENCE_TOL)?;
            Ok((kappa, seed, problem, reference))
        })
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|i| (0..specs.len()).map(move |a| (i, a))).collect();
    let results = cells
        .par_iter()
        .map(|&(i, a)| {
            let (_, seed, problem, reference) = &instances[i];
            algorithms::run_with(problem, &specs[a], Some(reference), Some(*seed), Some(config.eps_target))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (&(i, _), mut trace) in cells.iter().zip(results) {
        let (kappa, seed, _, reference) = &instances[i];
        let t_hit = iteration_complexity(&trace, reference.f_star, config.eps_target);
        rows.push(StudyRow {
            algorithm: trace.meta.label.clone(),
            kappa: *kappa,
            seed: *seed,
            t_hit,
            final_gap: trace.last().cost - reference.f_star,
            censored: t_hit.is_none(),
        });
        trace.meta.label = format!("{}_kappa{:02}", trace.meta.label, i);
        traces.push(trace);
    }
    let labels: Vec<String> = specs.iter().map(AlgorithmSpec::label).collect();
    let fits = labels
        .iter()
        .map(|label| {
            let mine: Vec<&StudyRow> = rows.iter().filter(|r| &r.algorithm == label).collect();
            let hits: Vec<(f64, f64)> =
                mine.iter().filter_map(|r| r.t_hit.map(|t| (r.kappa, t as f64))).collect();
            let (ks, ts): (Vec<f64>, Vec<f64>) = hits.into_iter().unzip();
            SlopeFit {
                algorithm: label.clone(),
                fit: fit_loglog(&ks, &ts),
                censored: mine.iter().filter(|r| r.censored).count(),
            }
        })
        .collect();
    Ok(ExperimentOutput {
        traces,
        report: StudyReport { eps_target: config.eps_target, round_cap: cap, rows, fits },
        report_name: "report.json",
    })
}

// ---------------------------------------------------------------------------
// Inexact-prox floors

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InexactFloorRow {
    pub label: String,
    pub terminal_gap: f64,
    pub terminal_dist: f64,
    /// Largest measured per-client prox residual over the run.
    pub b_bar: Option<f64>,
    /// `(sqrt(kappa) + 1) b_bar`
    pub floor_bound: Option<f64>,
    /// `|F(x_T) - F(x_T^exact)|` against the exact-prox run, when one is present.
    pub tracking_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InexactFloorReport {
    pub seed: u64,
    pub kappa: f64,
    pub rho: f64,
    pub f_star: f64,
    pub rows: Vec<InexactFloorRow>,
}

fn default_floor_algorithms(rounds: usize) -> Vec<AlgorithmSpec> {
    let mut v = vec![AlgorithmSpec::new(AlgorithmKind::Fedsplit { s: None, prox: ProxSolverSpec::exact() }, rounds)];
    for steps in [1, 5, 10] {
        v.push(AlgorithmSpec::new(
            AlgorithmKind::Fedsplit { s: None, prox: ProxSolverSpec::inexact_gradient(steps) },
            rounds,
        ));
    }
    v
}

fn floor_rows(traces: &[Trace], f_star: f64, kappa: Option<f64>) -> Vec<InexactFloorRow> {
    let exact_cost = traces
        .iter()
        .find(|t| t.meta.spec.as_ref().is_some_and(is_reference_fedsplit))
        .map(|t| t.last().cost);
    traces
        .iter()
        .map(|t| {
            let b_bar = t.max_client_residual();
            InexactFloorRow {
                label: t.meta.label.clone(),
                terminal_gap: t.last().cost - f_star,
                terminal_dist: t.last().dist_to_ref.unwrap_or(f64::NAN),
                b_bar,
                floor_bound: kappa.zip(b_bar).map(|(k, b)| (k.sqrt() + 1.0) * b),
                tracking_gap: exact_cost.map(|c| (t.last().cost - c).abs()),
            }
        })
        .collect()
}

fn is_reference_fedsplit(spec: &AlgorithmSpec) -> bool {
    matches!(spec.kind, AlgorithmKind::Fedsplit { prox, .. } if prox.is_exact())
        || matches!(spec.kind, AlgorithmKind::Fedsplit { prox, .. }
            if matches!(prox.mode, ProxMode::InexactNewton { .. }))
}

pub fn run_inexact_floor_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput<InexactFloorReport>> {
    config.validate()?;
    require_least_squares(config, "the inexact-floor experiment")?;
    let problem = config.problem()?;
    let reference = analysis::reference_optimum(&problem, REFERENCE_TOL)?;
    let specs = config.algorithms_or(default_floor_algorithms(500))?;
    let traces = specs
        .par_iter()
        .map(|spec| run_spec(&problem, spec, &reference, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let c = problem.constants();
    let kappa = c.condition_number();
    Ok(ExperimentOutput {
        report: InexactFloorReport {
            seed: config.seed,
            kappa,
            rho: contraction_rate(c.ell, c.big_l),
            f_star: reference.f_star,
            rows: floor_rows(&traces, reference.f_star, Some(kappa)),
        },
        traces,
        report_name: "floors.json",
    })
}

// ---------------------------------------------------------------------------
// Logistic experiment

/// FedSplit stepsize for losses without a global strong-convexity modulus:
/// `1/sqrt(ell_loc L*)` with `ell_loc` the smallest client Hessian eigenvalue
/// at the reference optimum.
pub fn local_fedsplit_stepsize(problem: &FederatedProblem, x_star: &DVector<f64>) -> Result<f64> {
    let ell_loc = problem
        .clients()
        .iter()
        .map(|f| extreme_eigenvalues(&f.hessian(x_star)).0)
        .fold(f64::INFINITY, f64::min);
    let big_l = problem.constants().big_l;
    if !(ell_loc > 0.0) {
        return Err(Error::Degenerate("client Hessians are singular at the reference optimum".into()));
    }
    Ok(1.0 / (ell_loc * big_l).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticReport {
    pub seed: u64,
    pub f_star: f64,
    pub reference_residual: f64,
    pub fedsplit_stepsize: f64,
    pub rows: Vec<InexactFloorRow>,
}

fn default_logistic_algorithms(rounds: usize) -> Vec<AlgorithmSpec> {
    let newton = ProxSolverSpec {
        mode: ProxMode::InexactNewton { tol: 1e-10, max_iter: 100 },
        ..ProxSolverSpec::exact()
    };
    let mut v = vec![
        AlgorithmSpec::new(AlgorithmKind::Fedgd { s: None, e: 1 }, rounds),
        AlgorithmSpec::new(AlgorithmKind::Fedsplit { s: None, prox: newton }, rounds),
    ];
    for steps in [1, 5, 10] {
        v.push(AlgorithmSpec::new(
            AlgorithmKind::Fedsplit { s: None, prox: ProxSolverSpec::inexact_gradient(steps) },
            rounds,
        ));
    }
    v
}

pub fn run_logistic_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput<LogisticReport>> {
    config.validate()?;
    if config.ensemble.is_least_squares() {
        return Err(Error::Config("the logistic experiment needs a logistic_gauss ensemble".into()));
    }
    let problem = config.problem()?;
    let reference = analysis::reference_optimum(&problem, REFERENCE_TOL)?;
    let s_split = local_fedsplit_stepsize(&problem, &reference.x_star)?;
    let mut specs = config.algorithms_or(default_logistic_algorithms(300))?;
    for spec in &mut specs {
        if let AlgorithmKind::Fedsplit { s: s @ None, .. } = &mut spec.kind {
            *s = Some(s_split);
        }
    }
    let traces = specs
        .par_iter()
        .map(|spec| run_spec(&problem, spec, &reference, config.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        report: LogisticReport {
            seed: config.seed,
            f_star: reference.f_star,
            reference_residual: reference.residual,
            fedsplit_stepsize: s_split,
            rows: floor_rows(&traces, reference.f_star, None),
        },
        traces,
        report_name: "floors.json",
    })
}

// ---------------------------------------------------------------------------
// Fixed-point verification of a single least-squares instance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub d: usize,
    pub m: usize,
    pub s: f64,
    pub e: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instance: InstanceSummary,
    /// Residuals evaluated at each oracle point.
    pub residuals: BTreeMap<String, FixedPointResiduals>,
    pub oracle_points: BTreeMap<String, Vec<f64>>,
    /// Distances of the FedGD and FedProx limits to the least-squares optimum.
    pub distances: BTreeMap<String, f64>,
}

pub fn verify_instance(problem: &FederatedProblem, s: f64, e: usize) -> Result<VerifyReport> {
    let ls = lsq_optimum(problem)?;
    let gd = fedgd_limit_lsq(problem, s, e)?;
    let prox = fedprox_limit_lsq(problem, s)?;
    let mut residuals = BTreeMap::new();
    let mut points = BTreeMap::new();
    let mut distances = BTreeMap::new();
    for (name, x) in [("lsq_optimum", &ls), ("fedgd_limit", &gd), ("fedprox_limit", &prox)] {
        residuals.insert(name.to_string(), fixedpoint_residuals(problem, s, e, x)?);
        points.insert(name.to_string(), x.as_slice().to_vec());
    }
    distances.insert("fedgd_limit_to_lsq".into(), (&gd - &ls).norm());
    distances.insert("fedprox_limit_to_lsq".into(), (&prox - &ls).norm());
    Ok(VerifyReport {
        instance: InstanceSummary { d: problem.dim(), m: problem.num_clients(), s, e },
        residuals,
        oracle_points: points,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_stems_suffix_repeats() {
        let stems = unique_stems(["a", "b", "a", "a"].into_iter());
        assert_eq!(stems, ["a", "b", "a_2", "a_3"]);
    }

    #[test]
    fn config_defaults_and_rejection() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"ensemble":{"logistic_gauss":{"m":2,"d":3,"n":10}}}"#).unwrap();
        assert_eq!(cfg.eps_target, DEFAULT_EPS_TARGET);
        assert_eq!(cfg.floors_experiment(), ExperimentKind::Logistic);
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"ensemble":{"logistic_gauss":{"m":2,"d":3,"n":10}},"bogus":1}"#
        )
        .is_err());
        let mut bad = cfg.clone();
        bad.eps_target = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn study_kappa_one_hits_quickly() {
        let mut cfg = ExperimentConfig::new(
            EnsembleKind::ConditionedLsq { m: 3, d: 5, n: 12, kappa: 1.0, sigma2: 1.0 },
            4,
        );
        cfg.kappa_grid = Some(vec![1.0]);
        cfg.rounds = Some(1000);
        let out = run_conditioning_study(&cfg).unwrap();
        for row in &out.report.rows {
            assert!(row.t_hit.is_some_and(|t| t <= 36), "{row:?}");
        }
    }

    #[test]
    fn verify_scalar_instance() {
        use crate::losses::{LocalLoss, QuadraticLoss};
        use nalgebra::DMatrix;
        let p = FederatedProblem::new(vec![
            LocalLoss::Quadratic(
                QuadraticLoss::new(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 2.0)).unwrap(),
            ),
            LocalLoss::Quadratic(
                QuadraticLoss::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0)).unwrap(),
            ),
        ])
        .unwrap();
        let r = verify_instance(&p, 0.1, 2).unwrap();
        assert!(r.residuals["fedgd_limit"].stationarity > 1e-3);
        assert!(r.residuals["fedgd_limit"].fedgd_res <= 1e-9);
        assert!(r.residuals["fedprox_limit"].fedprox_res <= 1e-9);
    }
}
