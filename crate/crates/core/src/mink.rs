//! Lorentz–Minkowski space L^{m+2}.
//!
//! Two bases are in use. Canonical coordinates carry the metric
//! diag(−1, 1, …, 1). The S-basis (ℓ, e₁, …, e_m, η) is a null basis with
//! Gram matrix
//!
//! ```text
//!     [ 0  0  1 ]
//! S = [ 0  I  0 ]
//!     [ 1  0  0 ]
//! ```
//!
//! and is fixed inside canonical coordinates by ℓ = (1,0,…,0,1)/√2,
//! η = (−1,0,…,0,1)/√2 and e_i the canonical spatial vectors. Note the sign of
//! η: ⟨ℓ, η⟩ must be +1.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Canonical,
    SBasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MinkBasisConvention {
    pub m: usize,
    pub kind: BasisKind,
}

impl MinkBasisConvention {
    pub fn canonical(m: usize) -> Self {
        Self { m, kind: BasisKind::Canonical }
    }

    pub fn s_basis(m: usize) -> Self {
        Self { m, kind: BasisKind::SBasis }
    }

    pub fn dim(&self) -> usize {
        self.m + 2
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            BasisKind::Canonical => canonical_metric(self.m),
            BasisKind::SBasis => s_matrix(self.m),
        }
    }
}

/// diag(−1, 1, …, 1) of size m+2.
pub fn canonical_metric(m: usize) -> DMatrix<f64> {
    let mut g = DMatrix::identity(m + 2, m + 2);
    g[(0, 0)] = -1.0;
    g
}

/// The Gram matrix of the null basis.
pub fn s_matrix(m: usize) -> DMatrix<f64> {
    let n = m + 2;
    let mut s = DMatrix::zeros(n, n);
    s[(0, n - 1)] = 1.0;
    s[(n - 1, 0)] = 1.0;
    for i in 1..=m {
        s[(i, i)] = 1.0;
    }
    s
}

/// Columns are ℓ, e₁, …, e_m, η in canonical coordinates.
pub fn s_to_canonical(m: usize) -> DMatrix<f64> {
    let n = m + 2;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut b = DMatrix::zeros(n, n);
    b[(0, 0)] = r;
    b[(n - 1, 0)] = r;
    b[(0, n - 1)] = -r;
    b[(n - 1, n - 1)] = r;
    for i in 1..=m {
        b[(i, i)] = 1.0;
    }
    b
}

/// Inverse of [`s_to_canonical`]; it is the transpose since the change of
/// basis is an orthogonal matrix.
pub fn canonical_to_s(m: usize) -> DMatrix<f64> {
    s_to_canonical(m).transpose()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinkVector {
    coords: DVector<f64>,
    convention: MinkBasisConvention,
}

impl MinkVector {
    pub fn new(coords: DVector<f64>, convention: MinkBasisConvention) -> Result<Self> {
        check_dim(convention.dim(), coords.len())?;
        Ok(Self { coords, convention })
    }

    pub fn canonical(coords: &[f64]) -> Result<Self> {
        if coords.len() < 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: coords.len() });
        }
        Self::new(DVector::from_column_slice(coords), MinkBasisConvention::canonical(coords.len() - 2))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn convention(&self) -> MinkBasisConvention {
        self.convention
    }
}

pub fn mink_inner(u: &MinkVector, v: &MinkVector) -> Result<f64> {
    if u.convention.m != v.convention.m {
        return Err(Error::DimensionMismatch { expected: u.convention.dim(), got: v.convention.dim() });
    }
    if u.convention.kind != v.convention.kind {
        return Err(Error::ConventionMismatch);
    }
    let (a, b) = (&u.coords, &v.coords);
    let n = a.len();
    Ok(match u.convention.kind {
        BasisKind::Canonical => -a[0] * b[0] + (1..n).map(|i| a[i] * b[i]).sum::<f64>(),
        BasisKind::SBasis => a[0] * b[n - 1] + a[n - 1] * b[0] + (1..n - 1).map(|i| a[i] * b[i]).sum::<f64>(),
    })
}

/// Canonical inner product on raw coordinate vectors.
pub fn lorentz_dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    -a[0] * b[0] + a.rows(1, a.len() - 1).dot(&b.rows(1, b.len() - 1))
}

pub fn basis_change(v: &MinkVector, target: MinkBasisConvention) -> Result<MinkVector> {
    check_dim(target.dim(), v.coords.len())?;
    let m = target.m;
    let coords = match (v.convention.kind, target.kind) {
        (BasisKind::SBasis, BasisKind::Canonical) => s_to_canonical(m) * &v.coords,
        (BasisKind::Canonical, BasisKind::SBasis) => canonical_to_s(m) * &v.coords,
        _ => v.coords.clone(),
    };
    MinkVector::new(coords, target)
}

/// Scale-aware membership test |⟨v,v⟩| ≤ 1e-9·(1+|v|²).
pub fn lightlike_residual(v: &DVector<f64>) -> f64 {
    lorentz_dot(v, v).abs() / (1.0 + v.norm_squared())
}

pub const LIGHTLIKE_TOL: f64 = 1e-9;

/// A point of the future light cone, stored in canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConePoint {
    v: DVector<f64>,
}

impl ConePoint {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.len() < 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: v.len() });
        }
        let r = lightlike_residual(&v);
        if r > LIGHTLIKE_TOL {
            return Err(Error::NotLightlike(r));
        }
        if v[0] <= 0.0 {
            return Err(Error::NotFuturePointing);
        }
        Ok(Self { v })
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn m(&self) -> usize {
        self.v.len() - 2
    }
}

/// π(v) = (v₁, …, v_{m+1}) / v₀.
pub fn project_to_sphere(v: &ConePoint) -> DVector<f64> {
    project_raw(&v.v)
}

/// The projection formula applied to any vector with v₀ ≠ 0; used for
/// differentiating π off the cone.
pub fn project_raw(v: &DVector<f64>) -> DVector<f64> {
    v.rows(1, v.len() - 1) / v[0]
}

/// i(x, s) = (s, s·x).
pub fn cone_embed(x: &DVector<f64>, s: f64) -> Result<ConePoint> {
    let n = x.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit(n));
    }
    if s <= 0.0 {
        return Err(Error::NonPositive("s"));
    }
    let mut v = DVector::zeros(x.len() + 1);
    v[0] = s;
    v.rows_mut(1, x.len()).copy_from(&(x * s));
    ConePoint::new(v)
}

/// The degenerate metric the cone inherits; tangent vectors must satisfy ⟨v, w⟩ = 0.
pub fn cone_metric(v: &ConePoint, w1: &DVector<f64>, w2: &DVector<f64>) -> Result<f64> {
    check_dim(v.v.len(), w1.len())?;
    check_dim(v.v.len(), w2.len())?;
    let scale = v.v.norm();
    for w in [w1, w2] {
        let r = lorentz_dot(&v.v, w).abs();
        if r > 1e-9 * (1.0 + scale * w.norm()) {
            return Err(Error::NotTangent(r));
        }
    }
    Ok(lorentz_dot(w1, w2))
}
