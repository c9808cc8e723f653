//! Seeded complex Gaussian source.
//!
//! Samples come from a ChaCha8 keystream (counter based, so a `(seed, stream)`
//! pair names an independent, reproducible sequence) turned into normals with
//! the Box–Muller transform. One uniform pair yields the real and imaginary
//! parts of one complex sample.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CMatrix, Complex64};

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream of `seed`, e.g. one per Monte-Carlo trial.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    fn box_muller(&mut self) -> (f64, f64) {
        // 1 - U lies in (0, 1], keeping ln finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.box_muller();
        self.spare = Some(b);
        a
    }

    /// Circularly-symmetric complex normal with total variance `variance`
    /// (`variance / 2` per dimension).
    pub fn complex(&mut self, variance: f64) -> Complex64 {
        let (a, b) = self.box_muller();
        let s = (variance / 2.0).sqrt();
        Complex64::new(s * a, s * b)
    }

    /// Matrix of i.i.d. complex normals, filled column by column.
    pub fn complex_matrix(&mut self, rows: usize, cols: usize, variance: f64) -> CMatrix {
        let mut m = CMatrix::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = self.complex(variance);
            }
        }
        m
    }
}
