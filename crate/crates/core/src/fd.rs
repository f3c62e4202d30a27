//! Central finite differences, with one level of Richardson extrapolation.

use std::ops::{Add, Mul, Sub};

/// Default step for first derivatives.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Step used when a first derivative is itself differentiated numerically.
/// Richardson extrapolation keeps the truncation error at O(h⁴).
pub const OUTER_STEP: f64 = 1e-3;

pub trait Linear: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Linear for T where T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// (f(h) − f(−h)) / 2h.
pub fn central<T: Linear>(f: impl Fn(f64) -> T, h: f64) -> T {
    (f(h) - f(-h)) * (0.5 / h)
}

/// Central difference at h and h/2 combined to cancel the h² term.
pub fn central_richardson<T: Linear>(f: impl Fn(f64) -> T, h: f64) -> T {
    let coarse = central(&f, h);
    let fine = central(&f, 0.5 * h);
    (fine * 4.0 - coarse) * (1.0 / 3.0)
}

/// [`central_richardson`] for fallible evaluations; the first error wins.
pub fn try_central_richardson<T: Linear, E>(f: impl Fn(f64) -> Result<T, E>, h: f64) -> Result<T, E> {
    let (p1, m1, p2, m2) = (f(h)?, f(-h)?, f(0.5 * h)?, f(-0.5 * h)?);
    let coarse = (p1 - m1) * (0.5 / h);
    let fine = (p2 - m2) * (1.0 / h);
    Ok((fine * 4.0 - coarse) * (1.0 / 3.0))
}

/// (f(h) − 2f(0) + f(−h)) / h².
pub fn second_central<T: Linear>(f: impl Fn(f64) -> T, h: f64) -> T {
    let mid = f(0.0);
    (f(h) + f(-h) - mid.clone() - mid) * (1.0 / (h * h))
}

/// Second central difference with Richardson extrapolation.
pub fn second_richardson<T: Linear>(f: impl Fn(f64) -> T, h: f64) -> T {
    let coarse = second_central(&f, h);
    let fine = second_central(&f, 0.5 * h);
    (fine * 4.0 - coarse) * (1.0 / 3.0)
}

/// Returns `x + t·e_k` as a fresh vector.
pub fn shifted(x: &[f64], k: usize, t: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += t;
    y
}

/// Returns `x + t·v`.
pub fn along(x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + t * b).collect()
}
