//! Stereographic coordinates on the unit sphere S^m ⊂ R^{m+1}.
//!
//! Projection from the north pole (0, …, 0, 1):
//! p(x) = (2x, |x|² − 1) / (|x|² + 1), round metric 4/(1+|x|²)² δ.
//! Points within angular distance 0.2 of the pole are never sampled.

use nalgebra::{DMatrix, DVector};

pub fn stereo_to_sphere(x: &[f64]) -> DVector<f64> {
    let m = x.len();
    let r2: f64 = x.iter().map(|a| a * a).sum();
    let d = 1.0 + r2;
    let mut p = DVector::zeros(m + 1);
    for i in 0..m {
        p[i] = 2.0 * x[i] / d;
    }
    p[m] = (r2 - 1.0) / d;
    p
}

/// Columns ∂p/∂x_k.
pub fn stereo_jacobian(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let r2: f64 = x.iter().map(|a| a * a).sum();
    let d = 1.0 + r2;
    let mut j = DMatrix::zeros(m + 1, m);
    for k in 0..m {
        for i in 0..m {
            let delta = if i == k { 1.0 } else { 0.0 };
            j[(i, k)] = 2.0 * delta / d - 4.0 * x[i] * x[k] / (d * d);
        }
        j[(m, k)] = 4.0 * x[k] / (d * d);
    }
    j
}

/// Inverse of [`stereo_to_sphere`]; undefined at the north pole.
pub fn sphere_to_stereo(p: &DVector<f64>) -> Vec<f64> {
    let m = p.len() - 1;
    (0..m).map(|i| p[i] / (1.0 - p[m])).collect()
}

/// Conformal factor 4/(1+|x|²)² of the round metric.
pub fn round_factor(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|a| a * a).sum();
    4.0 / ((1.0 + r2) * (1.0 + r2))
}

/// ∂_k of [`round_factor`].
pub fn round_factor_partial(x: &[f64], k: usize) -> f64 {
    let r2: f64 = x.iter().map(|a| a * a).sum();
    -16.0 * x[k] / (1.0 + r2).powi(3)
}

pub fn round_metric(x: &[f64]) -> DMatrix<f64> {
    DMatrix::identity(x.len(), x.len()) * round_factor(x)
}

/// Angular distance from the projection pole.
pub fn pole_distance(x: &[f64]) -> f64 {
    let p = stereo_to_sphere(x);
    p[p.len() - 1].clamp(-1.0, 1.0).acos()
}
