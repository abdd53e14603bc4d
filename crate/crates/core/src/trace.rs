// SPDX-License-Identifier: Apache-2.0

//! Per-round records and their CSV / JSON persistence.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::algorithms::AlgorithmSpec;
use crate::error::Result;
use crate::jsonfmt::{self, fmt_f64};

pub const CSV_HEADER: [&str; 6] = ["t", "cost", "gap", "grad_norm", "dist_to_ref", "prox_residual"];

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based; record `t` describes the server iterate `x^(t)`.
    pub t: usize,
    pub x: DVector<f64>,
    pub cost: f64,
    /// `||sum_j grad f_j(x^(t))||`
    pub grad_norm: f64,
    pub gap: Option<f64>,
    pub dist_to_ref: Option<f64>,
    /// Block norm of the prox residual `r^(t)` produced in round `t`.
    pub prox_residual: Option<f64>,
    /// Largest per-client residual norm in round `t`.
    pub prox_residual_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub label: String,
    pub spec: Option<AlgorithmSpec>,
    pub stepsize: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub f_star: Option<f64>,
    /// Wall-clock time; kept out of persisted output so files are reproducible.
    #[serde(skip)]
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    pub meta: TraceMeta,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    meta: &'a TraceMeta,
    records: usize,
    final_x: Vec<f64>,
    final_cost: f64,
    final_gap: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl Trace {
    pub fn last(&self) -> &RoundRecord {
        self.records.last().expect("traces hold at least the initial record")
    }

    pub fn final_x(&self) -> &DVector<f64> {
        &self.last().x
    }

    pub fn gaps(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.gap).collect()
    }

    /// Largest per-client prox residual over all rounds, if residuals were measured.
    pub fn max_client_residual(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.prox_residual_max)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                fmt_f64(r.cost),
                opt(r.gap),
                fmt_f64(r.grad_norm),
                opt(r.dist_to_ref),
                opt(r.prox_residual),
            ])?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn sidecar_json(&self) -> Result<Vec<u8>> {
        let last = self.last();
        let side = Sidecar {
            meta: &self.meta,
            records: self.records.len(),
            final_x: last.x.as_slice().to_vec(),
            final_cost: last.cost,
            final_gap: last.gap,
        };
        Ok(jsonfmt::to_vec(&side)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        fs::write(dir.join(format!("{stem}.json")), self.sidecar_json()?)?;
        Ok(())
    }
}
