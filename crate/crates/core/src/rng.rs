//! Seeded random sampling. Every routine takes an explicit generator; there is
//! no global state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sample `index` under `seed`. Samples can then be
/// evaluated in any order (or in parallel) with identical results.
pub fn stream(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

pub fn uniform_vec(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(lo..hi))
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthogonal matrix from the QR factorisation of a Gaussian matrix, with the
/// sign of R's diagonal absorbed so the distribution is Haar. The determinant
/// sign is then flipped with probability ½.
pub fn orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let det_sign = if q.determinant() > 0.0 { 1.0 } else { -1.0 };
    let want = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    if det_sign != want {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn skew(n: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = gaussian_matrix(n, n, rng) * scale;
    (&a - a.transpose()) * 0.5
}
