// SPDX-License-Identifier: Apache-2.0

//! Seeded, platform-independent random streams.
//!
//! Generator: ChaCha20 (counter based) keyed by `seed_from_u64(seed)`, with
//! one stream per consumer selected through the ChaCha stream id:
//!
//! * stream `0` holds problem-level draws (`x_true`);
//! * stream `j + 1` holds everything drawn for client `j`.
//!
//! Client data therefore does not depend on how many clients precede it.
//!
//! Uniforms are `(k + 1) / 2^53` for the top 53 bits `k` of a `u64`, so they
//! lie in `(0, 1]`. Gaussians use the Box–Muller pair
//! `sqrt(-2 ln u1) (cos 2 pi u2, sin 2 pi u2)`: the cosine variate is returned
//! first and the sine variate is cached for the next call. A cached variate is
//! dropped when the stream is discarded. Transcendentals come from `libm` so
//! streams are bit-identical across platforms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const GLOBAL_STREAM: u64 = 0;

pub fn client_stream(j: usize) -> u64 {
    j as u64 + 1
}

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        let k = self.rng.next_u64() >> 11;
        (k + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn normal_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.standard_normal())
    }

    /// Entries drawn in row-major order.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let vals: Vec<f64> = (0..rows * cols).map(|_| self.standard_normal()).collect();
        DMatrix::from_row_slice(rows, cols, &vals)
    }
}
