// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Singular Gram matrix or otherwise ill-posed closed form.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("stepsize {s} violates the spectral condition ||I - s A^T A|| < 1 (client {client}, norm {norm:.17e})")]
    Stepsize { s: f64, client: usize, norm: f64 },

    #[error("diverged at round {round}: cost {cost:.17e} exceeds 1e3 x initial cost {initial:.17e}")]
    Diverged { round: usize, cost: f64, initial: f64 },

    #[error("solver did not converge within {iterations} iterations (residual {residual:.17e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("round {round}, client {client}: {source}")]
    Round {
        round: usize,
        client: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Configuration and input errors as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
        )
    }

    /// Round index and residual carried by numerical failures, if any.
    pub fn diagnostics(&self) -> (Option<usize>, Option<f64>) {
        match self {
            Error::Diverged { round, cost, .. } => (Some(*round), Some(*cost)),
            Error::NonConvergence { residual, .. } => (None, Some(*residual)),
            Error::Round { round, source, .. } => (Some(*round), source.diagnostics().1),
            _ => (None, None),
        }
    }
}
