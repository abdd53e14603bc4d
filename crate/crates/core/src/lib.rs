// SPDX-License-Identifier: Apache-2.0

//! Federated convex optimization lab.
//!
//! Implements FedGD, FedProx and FedSplit (exact, inexact and regularized) on
//! collections of least-squares and logistic client losses, together with the
//! closed-form limits, reference optima and experiment drivers used to study
//! them.

pub mod algorithms;
pub mod analysis;
pub mod blockvec;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod jsonfmt;
pub mod losses;
pub mod newton;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod trace;

pub use algorithms::{AlgorithmKind, AlgorithmSpec, FedSplit, RunOptions};
pub use analysis::ReferenceSolution;
pub use blockvec::BlockVector;
pub use datagen::{EnsembleKind, EnsembleSpec};
pub use error::{Error, Result};
pub use losses::{ConvexityConstants, LocalLoss, LogisticLoss, QuadraticLoss};
pub use problem::FederatedProblem;
pub use prox::{ProxMode, ProxSolverSpec, WarmStart};
pub use trace::Trace;
