//! Lorentzian charts: Levi-Civita connection, curvature, time-oriented null
//! frames and the connection form on null frames.
//!
//! Curvature convention: R(X,Y)W = ∇_X∇_YW − ∇_Y∇_XW − ∇_{[X,Y]}W, and
//! Ric(X,Y) = tr(W ↦ R(W,X)Y). The Christoffel and curvature routines work for
//! any nondegenerate [`MetricField`], so Riemannian test metrics go through the
//! same code.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::fd;
use crate::lie::AlgebraElement;
use crate::metric::MetricField;
use crate::mink::s_matrix;

pub type VecFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Γ^k_ij, stored as `data[(k·n + i)·n + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// Γ(u, v)^k = Γ^k_ij u^i v^j.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.get(k, i, j) * u[i] * v[j];
                }
            }
            acc
        })
    }

    /// The matrix M_kj = Γ^k_ij w^i, so that ∇_w F = ∂_w F + M F column-wise.
    pub fn along(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.get(k, i, j) * w[i]).sum())
    }

    fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }
}

pub fn christoffels_of(metric: &MetricField, x: &[f64]) -> Result<Christoffel> {
    let n = metric.size();
    check_dim(metric.coord_dim(), x.len())?;
    check_dim(n, metric.coord_dim())?;
    let g = metric.eval(x);
    let ginv = g.try_inverse().ok_or(Error::Singular("metric"))?;
    let dg: Vec<DMatrix<f64>> = (0..n).map(|l| metric.partial(x, l)).collect();
    let mut first = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                first[(l * n + i) * n + j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                data[(k * n + i) * n + j] = (0..n).map(|l| ginv[(k, l)] * first[(l * n + i) * n + j]).sum();
            }
        }
    }
    Ok(Christoffel { n, data })
}

/// R^l_ijk, the ∂_l component of R(∂_i, ∂_j)∂_k, stored at `((l·n + i)·n + j)·n + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[((l * self.n + i) * self.n + j) * self.n + k]
    }

    /// The endomorphism W ↦ R(X,Y)W.
    pub fn endo(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |l, k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.get(l, i, j, k) * x[i] * y[j];
                }
            }
            acc
        })
    }

    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.endo(x, y) * w
    }

    /// Ric_jk = Σ_l R^l_ljk.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, k| (0..n).map(|l| self.get(l, l, j, k)).sum())
    }
}

/// Curvature from Christoffel symbols whose coordinate derivatives are taken by
/// Richardson-extrapolated central differences at `step`.
pub fn riemann_of(metric: &MetricField, x: &[f64], step: f64) -> Result<Riemann> {
    let n = metric.size();
    let gamma = christoffels_of(metric, x)?;
    let mut dgamma = Vec::with_capacity(n);
    for i in 0..n {
        let failed = std::cell::RefCell::new(None);
        let d = fd::central_richardson(
            |t| match christoffels_of(metric, &fd::shifted(x, i, t)) {
                Ok(c) => c.as_vector(),
                Err(e) => {
                    *failed.borrow_mut() = Some(e);
                    DVector::zeros(n * n * n)
                }
            },
            step,
        );
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        dgamma.push(d);
    }
    let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let mut data = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut r = dgamma[i][idx(l, j, k)] - dgamma[j][idx(l, i, k)];
                    for p in 0..n {
                        r += gamma.get(l, i, p) * gamma.get(p, j, k) - gamma.get(l, j, p) * gamma.get(p, i, k);
                    }
                    data[((l * n + i) * n + j) * n + k] = r;
                }
            }
        }
    }
    Ok(Riemann { n, data })
}

/// A chart of a Lorentzian manifold with a timelike orientation field.
#[derive(Clone)]
pub struct LorentzChart {
    pub metric: MetricField,
    orientation: VecFn,
    /// Step for differentiating Christoffel symbols.
    pub outer_step: f64,
}

impl std::fmt::Debug for LorentzChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LorentzChart").field("metric", &self.metric).field("outer_step", &self.outer_step).finish()
    }
}

impl LorentzChart {
    pub fn new(metric: MetricField, orientation: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Result<Self> {
        check_dim(metric.size(), metric.coord_dim())?;
        Ok(Self { metric, orientation: Arc::new(orientation), outer_step: fd::OUTER_STEP })
    }

    /// L^{m+2} in canonical coordinates, time-oriented by ∂₀.
    pub fn minkowski(m: usize) -> Self {
        let n = m + 2;
        let metric = MetricField::new(n, n, move |_| crate::mink::canonical_metric(m)).with_partials(move |_, _| DMatrix::zeros(n, n));
        Self::new(metric, move |_| {
            let mut t = DVector::zeros(n);
            t[0] = 1.0;
            t
        })
        .expect("square metric")
    }

    pub fn dim(&self) -> usize {
        self.metric.size()
    }

    pub fn g(&self, x: &[f64]) -> DMatrix<f64> {
        self.metric.eval(x)
    }

    pub fn inner(&self, x: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * self.g(x) * v)[(0, 0)]
    }

    pub fn time_orientation(&self, x: &[f64]) -> DVector<f64> {
        (self.orientation)(x)
    }

    /// Signature (n−1, 1) and g(T, T) < 0 at x.
    pub fn validate_at(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        let g = self.g(x);
        if (&g - g.transpose()).amax() > 1e-12 * (1.0 + g.amax()) {
            return Err(Error::InvalidParameter("metric not symmetric".into()));
        }
        let eig = g.clone().symmetric_eigen().eigenvalues;
        let scale = eig.amax().max(1e-300);
        let neg = eig.iter().filter(|e| **e < -1e-12 * scale).count();
        let pos = eig.iter().filter(|e| **e > 1e-12 * scale).count();
        if neg != 1 || pos != self.dim() - 1 {
            return Err(Error::InvalidParameter(format!("signature ({pos},{neg}) is not Lorentzian")));
        }
        let t = self.time_orientation(x);
        if self.inner(x, &t, &t) >= 0.0 {
            return Err(Error::InvalidParameter("orientation field not timelike".into()));
        }
        Ok(())
    }
}

pub fn christoffels(chart: &LorentzChart, x: &[f64]) -> Result<Christoffel> {
    christoffels_of(&chart.metric, x)
}

pub fn riemann_tensor(chart: &LorentzChart, x: &[f64]) -> Result<Riemann> {
    riemann_of(&chart.metric, x, chart.outer_step)
}

pub fn riemann(chart: &LorentzChart, x: &[f64], u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    let n = chart.dim();
    for a in [u, v, w] {
        check_dim(n, a.len())?;
    }
    Ok(riemann_tensor(chart, x)?.apply(u, v, w))
}

pub fn ricci_tensor(chart: &LorentzChart, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(riemann_tensor(chart, x)?.ricci())
}

pub fn ricci(chart: &LorentzChart, x: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dim(chart.dim(), u.len())?;
    check_dim(chart.dim(), v.len())?;
    Ok((u.transpose() * ricci_tensor(chart, x)? * v)[(0, 0)])
}

/// A frame (ℓ⁺, w₁, …, w_m, ℓ⁻) with Gram matrix S, stored as matrix columns.
#[derive(Clone, Debug, PartialEq)]
pub struct NullFrame {
    pub point: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl NullFrame {
    pub fn from_matrix(point: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        Self { point, vectors }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn l_plus(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    pub fn l_minus(&self) -> DVector<f64> {
        self.vectors.column(self.vectors.ncols() - 1).into_owned()
    }

    pub fn w(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i + 1).into_owned()
    }

    /// Right action u·σ = u∘σ for σ given in the null basis.
    pub fn act(&self, sigma: &DMatrix<f64>) -> Self {
        Self { point: self.point.clone(), vectors: &self.vectors * sigma }
    }

    /// max |FᵀGF − S|, and whether ℓ⁺ is future-pointing.
    pub fn check(&self, chart: &LorentzChart) -> (f64, bool) {
        let g = chart.g(&self.point);
        let n = self.vectors.ncols();
        let gram = self.vectors.transpose() * &g * &self.vectors;
        let r = (gram - s_matrix(n - 2)).amax();
        let t = chart.time_orientation(&self.point);
        (r, chart.inner(&self.point, &self.l_plus(), &t) < 0.0)
    }
}

/// Completes (ℓ⁺, w₁, …, w_m) with the unique null ℓ⁻ such that g(ℓ⁻, w_i) = 0
/// and g(ℓ⁺, ℓ⁻) = 1.
pub fn complete_null_frame(chart: &LorentzChart, x: &[f64], l_plus: &DVector<f64>, ws: &[DVector<f64>]) -> Result<NullFrame> {
    let n = chart.dim();
    check_dim(n, x.len())?;
    check_dim(n, l_plus.len())?;
    check_dim(n - 2, ws.len())?;
    let g = chart.g(x);
    let dot = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let scale = 1.0 + l_plus.norm_squared();
    if dot(l_plus, l_plus).abs() > 1e-8 * scale {
        return Err(Error::InvalidFrame("ℓ⁺ is not null".into()));
    }
    if dot(l_plus, &chart.time_orientation(x)) >= 0.0 {
        return Err(Error::InvalidFrame("ℓ⁺ is not future-pointing".into()));
    }
    for (i, wi) in ws.iter().enumerate() {
        check_dim(n, wi.len())?;
        if dot(l_plus, wi).abs() > 1e-8 * scale.sqrt() * (1.0 + wi.norm()) {
            return Err(Error::InvalidFrame(format!("w_{} not orthogonal to ℓ⁺", i + 1)));
        }
        for (j, wj) in ws.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot(wi, wj) - target).abs() > 1e-8 {
                return Err(Error::InvalidFrame("w_i not orthonormal".into()));
            }
        }
    }
    let mut a = DMatrix::zeros(n - 1, n);
    a.row_mut(0).copy_from(&(&g * l_plus).transpose());
    for (i, wi) in ws.iter().enumerate() {
        a.row_mut(i + 1).copy_from(&(&g * wi).transpose());
    }
    let mut rhs = DVector::zeros(n - 1);
    rhs[0] = 1.0;
    let svd = a.svd(true, true);
    let smin = svd.singular_values.min();
    if smin < 1e-12 * svd.singular_values.max().max(1.0) {
        return Err(Error::Singular("null frame system"));
    }
    let eta_p = svd.solve(&rhs, 1e-14).map_err(|_| Error::Singular("null frame system"))?;
    let t = -0.5 * dot(&eta_p, &eta_p);
    let eta = &eta_p + l_plus * t;
    let mut vectors = DMatrix::zeros(n, n);
    vectors.set_column(0, l_plus);
    for (i, wi) in ws.iter().enumerate() {
        vectors.set_column(i + 1, wi);
    }
    vectors.set_column(n - 1, &eta);
    Ok(NullFrame { point: x.to_vec(), vectors })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSample {
    pub value: AlgebraElement,
    /// Distance of the raw matrix from g before projection.
    pub algebra_residual: f64,
}

/// u⁻¹∇_w u + Y, where u is the frame at x and `dframe` its derivative along a
/// curve through x with velocity w.
pub fn connection_form(chart: &LorentzChart, frame: &NullFrame, dframe: &DMatrix<f64>, w: &DVector<f64>, y: &AlgebraElement) -> Result<ConnectionSample> {
    let n = chart.dim();
    check_dim(n, w.len())?;
    check_dim(n - 2, y.m())?;
    let x = &frame.point;
    let gamma = christoffels(chart, x)?;
    let nabla = dframe + gamma.along(w) * frame.matrix();
    let c = s_matrix(n - 2) * frame.matrix().transpose() * chart.g(x) * nabla;
    let (value, algebra_residual) = AlgebraElement::from_matrix_projected(&c);
    if algebra_residual > 1e-6 * (1.0 + c.amax()) {
        return Err(Error::InvalidFrame(format!("section is not a null frame field (residual {algebra_residual:e})")));
    }
    Ok(ConnectionSample { value: value.add(y), algebra_residual })
}

/// [`connection_form`] for a frame field defined near x; its derivative along w
/// is taken by central differences.
pub fn connection_form_section(
    chart: &LorentzChart,
    section: &dyn Fn(&[f64]) -> Result<NullFrame>,
    x: &[f64],
    w: &DVector<f64>,
    y: &AlgebraElement,
) -> Result<ConnectionSample> {
    let frame = section(x)?;
    let h = chart.metric.fd_step;
    let plus = section(&fd::along(x, w.as_slice(), h))?;
    let minus = section(&fd::along(x, w.as_slice(), -h))?;
    let dframe = (plus.matrix() - minus.matrix()) / (2.0 * h);
    connection_form(chart, &frame, &dframe, w, y)
}
