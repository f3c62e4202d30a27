//! Metric component evaluators with optional analytic partial derivatives.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::fd;

pub type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type PartialFn = Arc<dyn Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync>;

/// Maps chart coordinates to a symmetric component matrix.
#[derive(Clone)]
pub struct MetricField {
    coord_dim: usize,
    size: usize,
    eval: MatFn,
    partials: Option<PartialFn>,
    pub fd_step: f64,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("coord_dim", &self.coord_dim)
            .field("size", &self.size)
            .field("analytic_partials", &self.partials.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl MetricField {
    pub fn new(coord_dim: usize, size: usize, eval: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self { coord_dim, size, eval: Arc::new(eval), partials: None, fd_step: fd::DEFAULT_STEP }
    }

    /// `partials(x, k)` must return ∂_k of the component matrix.
    pub fn with_partials(mut self, partials: impl Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    pub fn without_partials(mut self) -> Self {
        self.partials = None;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        (self.eval)(x)
    }

    /// ∂_k, analytic when registered, else a central difference.
    pub fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        match &self.partials {
            Some(p) => p(x, k),
            None => self.partial_fd(x, k, self.fd_step),
        }
    }

    pub fn partial_fd(&self, x: &[f64], k: usize, h: f64) -> DMatrix<f64> {
        fd::central(|t| self.eval(&fd::shifted(x, k, t)), h)
    }
}
