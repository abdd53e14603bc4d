// SPDX-License-Identifier: Apache-2.0

//! Block-partitioned vectors `z = (z_1, ..., z_m)` with `z_j` in `R^d`.
//!
//! Blocks are stored as the columns of a dense `d x m` matrix, so each block
//! is contiguous in memory. All reductions over clients run in ascending
//! client order, which keeps traces bit-identical regardless of how the
//! per-client work was scheduled.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    data: DMatrix<f64>,
}

impl BlockVector {
    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("block vector needs at least one block".into()))?;
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidParameter("block dimension must be >= 1".into()));
        }
        if let Some(bad) = blocks.iter().find(|b| b.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        Ok(Self { data: DMatrix::from_columns(blocks) })
    }

    /// `m` copies of `x`.
    pub fn broadcast(x: &DVector<f64>, m: usize) -> Result<Self> {
        if m == 0 || x.is_empty() {
            return Err(Error::InvalidParameter("need m >= 1 and d >= 1".into()));
        }
        Ok(Self { data: DMatrix::from_fn(x.len(), m, |i, _| x[i]) })
    }

    pub fn num_blocks(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn block(&self, j: usize) -> DVectorView<'_, f64> {
        self.data.column(j)
    }

    pub fn set_block(&mut self, j: usize, v: &DVector<f64>) {
        self.data.set_column(j, v);
    }

    pub fn blocks(&self) -> Vec<DVector<f64>> {
        self.data.column_iter().map(|c| c.into_owned()).collect()
    }

    /// `(1/m) sum_j z_j`, summed in ascending client order.
    pub fn average(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for col in self.data.column_iter() {
            acc += col;
        }
        acc / self.num_blocks() as f64
    }

    /// Reflection through the consensus subspace: block `j` becomes `2 zbar - z_j`.
    pub fn reflect_consensus(&self) -> BlockVector {
        let twice_avg = self.average() * 2.0;
        let mut out = self.data.clone();
        for mut col in out.column_iter_mut() {
            let reflected = &twice_avg - &col;
            col.copy_from(&reflected);
        }
        Self { data: out }
    }

    /// Block `j` becomes `x + z_j`.
    pub fn broadcast_add(&self, x: &DVector<f64>) -> Result<BlockVector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let mut out = self.data.clone();
        for mut col in out.column_iter_mut() {
            col += x;
        }
        Ok(Self { data: out })
    }

    /// Euclidean norm on the product space `(R^d)^m`.
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn distance(&self, other: &BlockVector) -> f64 {
        (&self.data - &other.data).norm()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Free-function form of [`BlockVector::average`].
pub fn block_average(z: &BlockVector) -> DVector<f64> {
    z.average()
}

pub fn reflect_consensus(z: &BlockVector) -> BlockVector {
    z.reflect_consensus()
}

pub fn broadcast_add(x: &DVector<f64>, z: &BlockVector) -> Result<BlockVector> {
    z.broadcast_add(x)
}
