//! The Möbius group G ≅ O⁺(m+1,1), its subgroup H ≅ O(m) ⋉ R^m and the graded
//! Lie algebra g = g₋₁ ⊕ g₀ ⊕ g₁.
//!
//! Matrices are written in the null basis of [`crate::mink`], so σ ∈ G means
//! σᵀSσ = S. An algebra element has the block shape
//!
//! ```text
//!     [ a   Z    0  ]
//! Y = [ X   A   −Zᵀ ]      X ∈ g₋₁,  (a, A) ∈ g₀,  Z ∈ g₁
//!     [ 0  −Xᵀ  −a  ]
//! ```
//!
//! and h = o(m) ⊕ g₁ is the part with X = 0 and a = 0.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::mink::{canonical_to_s, s_matrix, s_to_canonical, ConePoint};
use crate::rng::{orthogonal, seeded, skew, uniform_vec};

const GROUP_TOL: f64 = 1e-10;
const ALGEBRA_TOL: f64 = 1e-12;

// ---------------------------------------------------------------- algebra

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub a: f64,
    pub x: DVector<f64>,
    pub skew: DMatrix<f64>,
    pub zrow: DVector<f64>,
}

/// The three graded pieces of an algebra element.
#[derive(Clone, Debug, PartialEq)]
pub struct Graded {
    pub minus: DVector<f64>,
    pub zero_a: f64,
    pub zero_skew: DMatrix<f64>,
    pub plus: DVector<f64>,
}

impl Graded {
    pub fn materialize(&self) -> AlgebraElement {
        AlgebraElement { a: self.zero_a, x: self.minus.clone(), skew: self.zero_skew.clone(), zrow: self.plus.clone() }
    }
}

impl AlgebraElement {
    pub fn zero(m: usize) -> Self {
        Self { a: 0.0, x: DVector::zeros(m), skew: DMatrix::zeros(m, m), zrow: DVector::zeros(m) }
    }

    /// The grading element E (a = 1).
    pub fn grading(m: usize) -> Self {
        Self { a: 1.0, ..Self::zero(m) }
    }

    /// E_i: the g₋₁ element with X = ē_i (0-based i).
    pub fn e_minus(m: usize, i: usize) -> Self {
        let mut y = Self::zero(m);
        y.x[i] = 1.0;
        y
    }

    pub fn from_minus(x: DVector<f64>) -> Self {
        let m = x.len();
        Self { x, ..Self::zero(m) }
    }

    pub fn from_plus(zrow: DVector<f64>) -> Self {
        let m = zrow.len();
        Self { zrow, ..Self::zero(m) }
    }

    pub fn from_skew(skew: DMatrix<f64>) -> Result<Self> {
        let r = (&skew + skew.transpose()).abs().max();
        if r > ALGEBRA_TOL * (1.0 + skew.abs().max()) {
            return Err(Error::InvalidAlgebraElement(r));
        }
        let m = skew.nrows();
        Ok(Self { skew, ..Self::zero(m) })
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    /// dim g = (m+1)(m+2)/2.
    pub fn dimension(m: usize) -> usize {
        (m + 1) * (m + 2) / 2
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        let n = m + 2;
        let mut y = DMatrix::zeros(n, n);
        y[(0, 0)] = self.a;
        y[(n - 1, n - 1)] = -self.a;
        for i in 0..m {
            y[(0, i + 1)] = self.zrow[i];
            y[(i + 1, n - 1)] = -self.zrow[i];
            y[(i + 1, 0)] = self.x[i];
            y[(n - 1, i + 1)] = -self.x[i];
        }
        y.view_mut((1, 1), (m, m)).copy_from(&self.skew);
        y
    }

    /// Reads the blocks of Y by symmetric averaging and reports how far Y is
    /// from g. Use for numerically produced matrices.
    pub fn from_matrix_projected(y: &DMatrix<f64>) -> (Self, f64) {
        let n = y.nrows();
        let m = n - 2;
        let a = 0.5 * (y[(0, 0)] - y[(n - 1, n - 1)]);
        let x = DVector::from_fn(m, |i, _| 0.5 * (y[(i + 1, 0)] - y[(n - 1, i + 1)]));
        let zrow = DVector::from_fn(m, |i, _| 0.5 * (y[(0, i + 1)] - y[(i + 1, n - 1)]));
        let block = y.view((1, 1), (m, m)).into_owned();
        let skew = (&block - block.transpose()) * 0.5;
        let e = Self { a, x, skew, zrow };
        let residual = (e.to_matrix() - y).abs().max();
        (e, residual)
    }

    /// Strict conversion: fails unless YᵀS + SY = 0 to 1e-12 (relative).
    pub fn from_matrix(y: &DMatrix<f64>) -> Result<Self> {
        if y.nrows() != y.ncols() || y.nrows() < 4 {
            return Err(Error::DimensionMismatch { expected: y.nrows().max(4), got: y.ncols() });
        }
        let (e, r) = Self::from_matrix_projected(y);
        if r > ALGEBRA_TOL * (1.0 + y.abs().max()) {
            return Err(Error::InvalidAlgebraElement(r));
        }
        Ok(e)
    }

    /// Coordinates (a, X, A_{ij} for i<j, Z) of length dim g.
    pub fn to_coords(&self) -> DVector<f64> {
        let m = self.m();
        let mut c = Vec::with_capacity(Self::dimension(m));
        c.push(self.a);
        c.extend(self.x.iter());
        for i in 0..m {
            for j in i + 1..m {
                c.push(self.skew[(i, j)]);
            }
        }
        c.extend(self.zrow.iter());
        DVector::from_vec(c)
    }

    pub fn from_coords(m: usize, c: &DVector<f64>) -> Result<Self> {
        check_dim(Self::dimension(m), c.len())?;
        let mut e = Self::zero(m);
        e.a = c[0];
        for i in 0..m {
            e.x[i] = c[1 + i];
        }
        let mut k = 1 + m;
        for i in 0..m {
            for j in i + 1..m {
                e.skew[(i, j)] = c[k];
                e.skew[(j, i)] = -c[k];
                k += 1;
            }
        }
        for i in 0..m {
            e.zrow[i] = c[k + i];
        }
        Ok(e)
    }

    /// Index of the first h coordinate in [`Self::to_coords`]; everything
    /// before it is (a, X), i.e. the quotient g/h.
    pub fn h_offset(m: usize) -> usize {
        m + 1
    }

    pub fn grade(&self) -> Graded {
        Graded { minus: self.x.clone(), zero_a: self.a, zero_skew: self.skew.clone(), plus: self.zrow.clone() }
    }

    /// Projection g → g/h.
    pub fn quotient(&self) -> QuotientVector {
        QuotientVector { a: self.a, x: self.x.clone() }
    }

    pub fn is_in_h(&self, tol: f64) -> bool {
        self.a.abs() <= tol && self.x.amax() <= tol
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { a: self.a + other.a, x: &self.x + &other.x, skew: &self.skew + &other.skew, zrow: &self.zrow + &other.zrow }
    }

    pub fn scale(&self, t: f64) -> Self {
        Self { a: self.a * t, x: &self.x * t, skew: &self.skew * t, zrow: &self.zrow * t }
    }

    /// Max-abs norm of the coordinates.
    pub fn max_abs(&self) -> f64 {
        self.to_coords().amax()
    }

    pub fn random(m: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self { a: rng.gen_range(-scale..scale), x: uniform_vec(m, -scale, scale, rng), skew: skew(m, scale, rng), zrow: uniform_vec(m, -scale, scale, rng) }
    }

    pub fn random_h(m: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self { a: 0.0, x: DVector::zeros(m), ..Self::random(m, scale, rng) }
    }

    /// A basis of h in coordinate order (skew part first, then g₁).
    pub fn h_basis(m: usize) -> Vec<Self> {
        let d = Self::dimension(m);
        (Self::h_offset(m)..d)
            .map(|k| {
                let mut c = DVector::zeros(d);
                c[k] = 1.0;
                Self::from_coords(m, &c).expect("coordinate basis")
            })
            .collect()
    }
}

pub fn bracket(y1: &AlgebraElement, y2: &AlgebraElement) -> Result<AlgebraElement> {
    check_dim(y1.m(), y2.m())?;
    let (a, b) = (y1.to_matrix(), y2.to_matrix());
    let c = &a * &b - &b * &a;
    Ok(AlgebraElement::from_matrix_projected(&c).0)
}

/// An element of g/h ≅ R ⊕ R^m.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientVector {
    pub a: f64,
    pub x: DVector<f64>,
}

impl QuotientVector {
    pub fn new(a: f64, x: DVector<f64>) -> Self {
        Self { a, x }
    }

    /// (1, 0), the class of the grading element.
    pub fn radial(m: usize) -> Self {
        Self { a: 1.0, x: DVector::zeros(m) }
    }

    pub fn basis(m: usize, k: usize) -> Self {
        let mut v = DVector::zeros(m + 1);
        v[k] = 1.0;
        Self::from_vector(&v)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.x.len() + 1);
        v[0] = self.a;
        v.rows_mut(1, self.x.len()).copy_from(&self.x);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self { a: v[0], x: v.rows(1, v.len() - 1).into_owned() }
    }

    /// The lightlike metric q((a,X),(b,Y)) = X·Y.
    pub fn q(&self, other: &Self) -> f64 {
        self.x.dot(&other.x)
    }
}

// ---------------------------------------------------------------- groups

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
}

impl GroupElement {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() || n < 4 {
            return Err(Error::DimensionMismatch { expected: n.max(4), got: matrix.ncols() });
        }
        let s = s_matrix(n - 2);
        let r = (matrix.transpose() * &s * &matrix - &s).abs().max();
        if r > GROUP_TOL * (1.0 + matrix.norm_squared()) {
            return Err(Error::InvalidGroupElement(format!("σᵀSσ ≠ S (residual {r:e})")));
        }
        let first = s_to_canonical(n - 2) * matrix.column(0);
        if first[0] <= 0.0 {
            return Err(Error::InvalidGroupElement("first column not future-pointing".into()));
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self { matrix: DMatrix::identity(m + 2, m + 2) }
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows() - 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// σ⁻¹ = SσᵀS.
    pub fn inverse(&self) -> Self {
        let s = s_matrix(self.m());
        Self { matrix: &s * self.matrix.transpose() * &s }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix * &other.matrix }
    }

    /// The same linear map in canonical coordinates.
    pub fn to_canonical(&self) -> DMatrix<f64> {
        let m = self.m();
        s_to_canonical(m) * &self.matrix * canonical_to_s(m)
    }

    /// exp(Y)·h with Y random of the given scale and h a random element of H,
    /// which reaches both components of O⁺.
    pub fn random(m: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let y = AlgebraElement::random(m, scale, rng);
        exp(&y).mul(&HElement::random(m, rng).to_group())
    }
}

/// (w, g) ∈ R^m ⋊ O(m), materialised as
///
/// ```text
/// [ 1  −wᵀg  −|w|²/2 ]
/// [ 0    g      w    ]
/// [ 0    0      1    ]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct HElement {
    pub w: DVector<f64>,
    pub g: DMatrix<f64>,
}

impl HElement {
    pub fn new(w: DVector<f64>, g: DMatrix<f64>) -> Result<Self> {
        let m = w.len();
        check_dim(m, g.nrows())?;
        check_dim(m, g.ncols())?;
        let r = (g.transpose() * &g - DMatrix::identity(m, m)).abs().max();
        if r > GROUP_TOL {
            return Err(Error::InvalidGroupElement(format!("g not orthogonal (residual {r:e})")));
        }
        Ok(Self { w, g })
    }

    pub fn identity(m: usize) -> Self {
        Self { w: DVector::zeros(m), g: DMatrix::identity(m, m) }
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        let n = m + 2;
        let mut s = DMatrix::identity(n, n);
        let wg = self.g.transpose() * &self.w;
        for i in 0..m {
            s[(0, i + 1)] = -wg[i];
            s[(i + 1, n - 1)] = self.w[i];
        }
        s[(0, n - 1)] = -0.5 * self.w.norm_squared();
        s.view_mut((1, 1), (m, m)).copy_from(&self.g);
        s
    }

    /// Reads (w, g) off a group element, which must lie in H.
    pub fn from_group(sigma: &GroupElement) -> Result<Self> {
        let m = sigma.m();
        let mat = sigma.matrix();
        let w = mat.view((1, m + 1), (m, 1)).column(0).into_owned();
        let h = Self::new(w, mat.view((1, 1), (m, m)).into_owned())?;
        let r = (h.to_matrix() - mat).amax();
        if r > GROUP_TOL {
            return Err(Error::InvalidGroupElement(format!("not in H (residual {r:e})")));
        }
        Ok(h)
    }

    pub fn to_group(&self) -> GroupElement {
        GroupElement { matrix: self.to_matrix() }
    }

    /// (w₁, g₁)(w₂, g₂) = (w₁ + g₁w₂, g₁g₂).
    pub fn compose(&self, other: &Self) -> Self {
        Self { w: &self.w + &self.g * &other.w, g: &self.g * &other.g }
    }

    pub fn inverse(&self) -> Self {
        let gt = self.g.transpose();
        Self { w: -(&gt * &self.w), g: gt }
    }

    /// The action on g/h as the (m+1)×(m+1) matrix [[1, −wᵀg], [0, g]].
    pub fn quotient_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut q = DMatrix::identity(m + 1, m + 1);
        let wg = self.g.transpose() * &self.w;
        for i in 0..m {
            q[(0, i + 1)] = -wg[i];
        }
        q.view_mut((1, 1), (m, m)).copy_from(&self.g);
        q
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.w.amax() <= tol && (&self.g - DMatrix::identity(self.m(), self.m())).amax() <= tol
    }

    /// w uniform in [−1,1]^m, g Haar-orthogonal with balanced determinant sign.
    pub fn random(m: usize, rng: &mut impl Rng) -> Self {
        Self { w: uniform_vec(m, -1.0, 1.0, rng), g: orthogonal(m, rng) }
    }
}

/// Ād[σ](a, X) = (a − w·(gX), gX).
pub fn ad_quotient(sigma: &HElement, v: &QuotientVector) -> QuotientVector {
    let gx = &sigma.g * &v.x;
    QuotientVector { a: v.a - sigma.w.dot(&gx), x: gx }
}

/// σYσ⁻¹.
pub fn ad_full(sigma: &GroupElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    check_dim(sigma.m(), y.m())?;
    let c = sigma.matrix() * y.to_matrix() * sigma.inverse().matrix();
    Ok(AlgebraElement::from_matrix_projected(&c).0)
}

/// Closed form of Ad[σ](E) for σ ∈ H: the grading element plus the g₁ row w.
pub fn ad_h_grading(sigma: &HElement) -> AlgebraElement {
    let m = sigma.m();
    AlgebraElement { a: 1.0, zrow: sigma.w.clone(), ..AlgebraElement::zero(m) }
}

/// Closed form of Ad[σ](E_i) for σ ∈ H. With u = gē_i:
/// a = −w·u, X = u, A = u wᵀ − w uᵀ, Z = −(w·u) wᵀ + ½|w|² uᵀ.
pub fn ad_h_minus(sigma: &HElement, i: usize) -> AlgebraElement {
    let u = sigma.g.column(i).into_owned();
    let w = &sigma.w;
    let wu = w.dot(&u);
    AlgebraElement { a: -wu, x: u.clone(), skew: &u * w.transpose() - w * u.transpose(), zrow: w * (-wu) + &u * (0.5 * w.norm_squared()) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectivityReport {
    pub trials: usize,
    /// Largest displacement |Ād[σ]v − v| over all trials and probes.
    pub max_deviation: f64,
    /// Smallest per-trial displacement; a violation would show up as ≈ 0.
    pub min_deviation: f64,
    pub violations: usize,
}

/// Searches random non-identity σ ∈ H for a vector moved by Ād[σ]. Probes are
/// the basis vectors (0, ē_j) and one random vector per trial.
pub fn injectivity_witness(m: usize, trials: usize, seed: u64) -> InjectivityReport {
    let mut rng = seeded(seed);
    let mut report = InjectivityReport { trials, max_deviation: 0.0, min_deviation: f64::INFINITY, violations: 0 };
    let mut done = 0;
    while done < trials {
        let sigma = HElement::random(m, &mut rng);
        if sigma.is_identity(1e-6) {
            continue;
        }
        done += 1;
        let mut probes: Vec<QuotientVector> = (1..=m).map(|k| QuotientVector::basis(m, k)).collect();
        probes.push(QuotientVector::from_vector(&uniform_vec(m + 1, -1.0, 1.0, &mut rng)));
        let dev = probes.iter().map(|v| (ad_quotient(&sigma, v).to_vector() - v.to_vector()).amax()).fold(0.0, f64::max);
        report.max_deviation = report.max_deviation.max(dev);
        report.min_deviation = report.min_deviation.min(dev);
        if dev < 1e-12 {
            report.violations += 1;
        }
    }
    report
}

/// A rank-one element of euc(E^m) (translation ē₁, no rotation), together with
/// its image in h under (A, Z) ↦ skew A, g₁ row Z.
pub fn rank_one_witness(m: usize) -> (DMatrix<f64>, AlgebraElement) {
    let mut euc = DMatrix::zeros(m + 1, m + 1);
    euc[(1, 0)] = 1.0;
    let mut z = DVector::zeros(m);
    z[0] = 1.0;
    (euc, AlgebraElement::from_plus(z))
}

/// The isomorphism euc(E^m) → h used by [`rank_one_witness`]; the input has
/// block form [[0, 0], [Z, A]].
pub fn euc_to_h(euc: &DMatrix<f64>) -> AlgebraElement {
    let m = euc.nrows() - 1;
    AlgebraElement { a: 0.0, x: DVector::zeros(m), skew: euc.view((1, 1), (m, m)).into_owned(), zrow: euc.view((1, 0), (m, 1)).column(0).into_owned() }
}

/// Matrix exponential (Padé scaling and squaring).
pub fn exp(y: &AlgebraElement) -> GroupElement {
    GroupElement { matrix: y.to_matrix().exp() }
}

/// ω(σ)(ξ) = σ⁻¹ξ = SσᵀSξ for ξ tangent at σ.
pub fn maurer_cartan(sigma: &GroupElement, xi: &DMatrix<f64>) -> Result<AlgebraElement> {
    let m = sigma.m();
    check_dim(m + 2, xi.nrows())?;
    let s = s_matrix(m);
    let tangency = (xi.transpose() * &s * sigma.matrix() + sigma.matrix().transpose() * &s * xi).abs().max();
    if tangency > 1e-8 * (1.0 + xi.abs().max() * sigma.matrix().abs().max()) {
        return Err(Error::NotTangent(tangency));
    }
    let y = &s * sigma.matrix().transpose() * &s * xi;
    Ok(AlgebraElement::from_matrix_projected(&y).0)
}

/// (σv)⁺: σ applied to a cone point, sign fixed so the result is future-pointing.
pub fn cone_action(sigma: &GroupElement, v: &ConePoint) -> Result<ConePoint> {
    check_dim(sigma.m(), v.m())?;
    let mut w = sigma.to_canonical() * v.vector();
    if w[0] < 0.0 {
        w.neg_mut();
    }
    ConePoint::new(w)
}

/// A conformal map of the unit sphere S^m ⊂ R^{m+1} with factor e^{2φ}.
pub trait SphereConformalMap {
    /// Returns (Φ(x), φ(x)).
    fn apply(&self, x: &DVector<f64>) -> (DVector<f64>, f64);
}

pub struct IdentityMap;

impl SphereConformalMap for IdentityMap {
    fn apply(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        (x.clone(), 0.0)
    }
}

/// x ↦ Rx with R orthogonal.
pub struct RotationMap(pub DMatrix<f64>);

impl SphereConformalMap for RotationMap {
    fn apply(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        (&self.0 * x, 0.0)
    }
}

/// The sphere map induced by σ ∈ G: x ↦ spatial part of σ(1,x)⁺ divided by its
/// time component, with e^{−φ(x)} = σ(1,x)⁺₀.
pub struct MobiusSphereMap {
    canonical: DMatrix<f64>,
}

impl MobiusSphereMap {
    pub fn new(sigma: &GroupElement) -> Self {
        Self { canonical: sigma.to_canonical() }
    }
}

impl SphereConformalMap for MobiusSphereMap {
    fn apply(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut v = DVector::zeros(x.len() + 1);
        v[0] = 1.0;
        v.rows_mut(1, x.len()).copy_from(x);
        let mut u = &self.canonical * v;
        if u[0] < 0.0 {
            u.neg_mut();
        }
        (u.rows(1, x.len()) / u[0], -u[0].ln())
    }
}

/// f(x, s) = (Φ(x), s·e^{−φ(x)}).
pub fn model_isometry(phi: &dyn SphereConformalMap, x: &DVector<f64>, s: f64) -> Result<(DVector<f64>, f64)> {
    let n = x.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit(n));
    }
    if s <= 0.0 {
        return Err(Error::NonPositive("s"));
    }
    let (y, p) = phi.apply(x);
    Ok((y, s * (-p).exp()))
}

/// σ(s, t) = exp(sA)·exp(tB)·exp(stC), a two-parameter family in G with
/// closed-form partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoParameterFamily {
    pub a: AlgebraElement,
    pub b: AlgebraElement,
    pub c: AlgebraElement,
}

impl TwoParameterFamily {
    pub fn random(m: usize, scale: f64, rng: &mut impl Rng) -> Self {
        Self { a: AlgebraElement::random(m, scale, rng), b: AlgebraElement::random(m, scale, rng), c: AlgebraElement::random(m, scale, rng) }
    }

    fn factors(&self, s: f64, t: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        ((self.a.to_matrix() * s).exp(), (self.b.to_matrix() * t).exp(), (self.c.to_matrix() * (s * t)).exp())
    }

    pub fn sigma(&self, s: f64, t: f64) -> GroupElement {
        let (ea, eb, ec) = self.factors(s, t);
        GroupElement { matrix: ea * eb * ec }
    }

    /// (∂_sσ, ∂_tσ).
    pub fn partials(&self, s: f64, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (ea, eb, ec) = self.factors(s, t);
        let (a, b, c) = (self.a.to_matrix(), self.b.to_matrix(), self.c.to_matrix());
        let ds = &a * &ea * &eb * &ec + &ea * &eb * &c * &ec * t;
        let dt = &ea * &b * &eb * &ec + &ea * &eb * &c * &ec * s;
        (ds, dt)
    }

    /// (ω(∂_s), ω(∂_t)) for the Maurer–Cartan form ω.
    pub fn pulled_back(&self, s: f64, t: f64) -> Result<(AlgebraElement, AlgebraElement)> {
        let sigma = self.sigma(s, t);
        let (ds, dt) = self.partials(s, t);
        Ok((maurer_cartan(&sigma, &ds)?, maurer_cartan(&sigma, &dt)?))
    }
}

/// max |∂_sω_t − ∂_tω_s + [ω_s, ω_t]| at (s, t), with the outer derivatives
/// taken by central differences of step h.
pub fn structure_residual(family: &TwoParameterFamily, s: f64, t: f64, h: f64) -> Result<f64> {
    let (ws, wt) = family.pulled_back(s, t)?;
    let (_, wt_p) = family.pulled_back(s + h, t)?;
    let (_, wt_m) = family.pulled_back(s - h, t)?;
    let (ws_p, _) = family.pulled_back(s, t + h)?;
    let (ws_m, _) = family.pulled_back(s, t - h)?;
    let dswt = (wt_p.to_coords() - wt_m.to_coords()) / (2.0 * h);
    let dtws = (ws_p.to_coords() - ws_m.to_coords()) / (2.0 * h);
    let total = dswt - dtws + bracket(&ws, &wt)?.to_coords();
    Ok(total.amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::mink::{cone_embed, lorentz_dot};
    use crate::rng::seeded;

    #[test]
    fn matrix_layout_is_in_the_algebra() {
        let mut rng = seeded(11);
        for m in 2..5 {
            let s = s_matrix(m);
            for _ in 0..20 {
                let y = AlgebraElement::random(m, 1.0, &mut rng);
                let mat = y.to_matrix();
                assert!((mat.transpose() * &s + &s * &mat).abs().max() < 1e-14);
                assert_eq!(AlgebraElement::from_matrix(&mat).unwrap(), y);
                assert_eq!(AlgebraElement::from_coords(m, &y.to_coords()).unwrap(), y);
                assert_eq!(y.grade().materialize(), y);
                assert_eq!(y.scale(2.0).grade().minus, &y.grade().minus * 2.0);
            }
        }
        assert!(AlgebraElement::from_matrix(&DMatrix::identity(5, 5)).is_err());
    }

    #[test]
    fn grading_examples() {
        let m = 3;
        let e1 = AlgebraElement::e_minus(m, 0);
        let g = e1.grade();
        assert_eq!(g.minus[0], 1.0);
        assert_eq!(g.zero_a, 0.0);
        assert_eq!(g.plus.amax(), 0.0);
        let e = AlgebraElement::grading(m);
        assert_eq!(e.grade().zero_a, 1.0);
        let b = bracket(&e, &e1).unwrap();
        assert!((b.add(&e1)).max_abs() < 1e-15);
        let z = AlgebraElement::from_plus(DVector::from_vec(vec![0.0, 1.0, 0.0]));
        let b = bracket(&e, &z).unwrap();
        assert!((b.add(&z.scale(-1.0))).max_abs() < 1e-15);
    }

    #[test]
    fn bracket_properties() {
        let mut rng = seeded(12);
        let m = 3;
        for _ in 0..50 {
            let a = AlgebraElement::random(m, 1.0, &mut rng);
            let b = AlgebraElement::random(m, 1.0, &mut rng);
            let c = AlgebraElement::random(m, 1.0, &mut rng);
            assert!(bracket(&a, &a).unwrap().max_abs() < 1e-15);
            let (am, bm) = (a.to_matrix(), b.to_matrix());
            let direct = &am * &bm - &bm * &am;
            assert!((bracket(&a, &b).unwrap().to_matrix() - direct).abs().max() < 1e-13);
            let anti = bracket(&a, &b).unwrap().add(&bracket(&b, &a).unwrap());
            assert!(anti.max_abs() < 1e-14);
            let jac = bracket(&a, &bracket(&b, &c).unwrap())
                .unwrap()
                .add(&bracket(&b, &bracket(&c, &a).unwrap()).unwrap())
                .add(&bracket(&c, &bracket(&a, &b).unwrap()).unwrap());
            assert!(jac.max_abs() < 1e-12);
            let lo = AlgebraElement::from_minus(a.x.clone());
            let hi = AlgebraElement::from_plus(b.zrow.clone());
            let br = bracket(&lo, &hi).unwrap();
            assert!(br.x.amax() < 1e-15 && br.zrow.amax() < 1e-15);
        }
    }

    #[test]
    fn h_elements_are_group_elements() {
        let mut rng = seeded(13);
        for m in 2..5 {
            for _ in 0..20 {
                let h = HElement::random(m, &mut rng);
                GroupElement::from_matrix(h.to_matrix()).unwrap();
                let k = HElement::random(m, &mut rng);
                let prod = h.compose(&k).to_matrix();
                assert!((prod - h.to_matrix() * k.to_matrix()).abs().max() < 1e-13);
                assert!(h.compose(&h.inverse()).is_identity(1e-13));
                let inv = h.to_group().inverse();
                assert!((inv.matrix() - h.inverse().to_matrix()).abs().max() < 1e-13);
            }
        }
        assert!(HElement::new(DVector::zeros(2), DMatrix::from_element(2, 2, 1.0)).is_err());
    }

    #[test]
    fn ad_quotient_examples() {
        let m = 3;
        let v = QuotientVector::new(0.3, DVector::from_vec(vec![1.0, -2.0, 0.5]));
        assert_eq!(ad_quotient(&HElement::identity(m), &v), v);
        let mut w = DVector::zeros(m);
        w[0] = 1.0;
        let sigma = HElement::new(w, DMatrix::identity(m, m)).unwrap();
        let out = ad_quotient(&sigma, &QuotientVector::basis(m, 1));
        assert_eq!(out.a, -1.0);
        assert_eq!(out.x, QuotientVector::basis(m, 1).x);
        let full = ad_full(&sigma.to_group(), &AlgebraElement::e_minus(m, 0)).unwrap();
        assert!((full.quotient().to_vector() - out.to_vector()).amax() < 1e-15);
    }

    #[test]
    fn ad_quotient_is_a_homomorphism_preserving_q() {
        let mut rng = seeded(14);
        let m = 3;
        for _ in 0..200 {
            let s1 = HElement::random(m, &mut rng);
            let s2 = HElement::random(m, &mut rng);
            let v = QuotientVector::from_vector(&uniform_vec(m + 1, -1.0, 1.0, &mut rng));
            let u = QuotientVector::from_vector(&uniform_vec(m + 1, -1.0, 1.0, &mut rng));
            let lhs = ad_quotient(&s1.compose(&s2), &v);
            let rhs = ad_quotient(&s1, &ad_quotient(&s2, &v));
            assert!((lhs.to_vector() - rhs.to_vector()).amax() < 1e-13);
            let q0 = v.q(&u);
            let q1 = ad_quotient(&s1, &v).q(&ad_quotient(&s1, &u));
            assert!((q0 - q1).abs() < 1e-13);
            let r = ad_quotient(&s1, &QuotientVector::radial(m));
            assert_eq!(r, QuotientVector::radial(m));
            let mat = s1.quotient_matrix() * v.to_vector();
            assert!((mat - ad_quotient(&s1, &v).to_vector()).amax() < 1e-14);
        }
    }

    #[test]
    fn ad_closed_forms() {
        let mut rng = seeded(15);
        for m in 2..5 {
            for _ in 0..100 {
                let h = HElement::random(m, &mut rng);
                let g = h.to_group();
                let e = ad_full(&g, &AlgebraElement::grading(m)).unwrap();
                assert!((e.to_coords() - ad_h_grading(&h).to_coords()).amax() < 1e-12);
                for i in 0..m {
                    let ei = ad_full(&g, &AlgebraElement::e_minus(m, i)).unwrap();
                    assert!((ei.to_coords() - ad_h_minus(&h, i).to_coords()).amax() < 1e-12);
                }
                assert_eq!(ad_full(&GroupElement::identity(m), &e).unwrap(), e);
            }
        }
    }

    #[test]
    fn non_reductivity_witness() {
        let mut rng = seeded(16);
        let h = HElement::random(3, &mut rng);
        let e = ad_full(&h.to_group(), &AlgebraElement::grading(3)).unwrap();
        // Leaves g₋₁ ⊕ z(g₀): the g₁ row equals w ≠ 0.
        assert!(e.zrow.amax() > 1e-3);
        assert!((&e.zrow - &h.w).amax() < 1e-13);
    }

    #[test]
    fn injectivity() {
        let r = injectivity_witness(3, 1000, 7);
        assert_eq!(r.violations, 0);
        assert!(r.min_deviation > 0.0);
        let m = 3;
        let mut g = DMatrix::identity(m, m);
        g[(0, 0)] = 0.0;
        g[(1, 1)] = 0.0;
        g[(0, 1)] = -1.0;
        g[(1, 0)] = 1.0;
        let rot = HElement::new(DVector::zeros(m), g).unwrap();
        let moved = ad_quotient(&rot, &QuotientVector::basis(m, 1));
        assert!((moved.to_vector() - QuotientVector::basis(m, 1).to_vector()).amax() > 0.5);
    }

    #[test]
    fn rank_one_element() {
        for m in 2..5 {
            let (euc, h) = rank_one_witness(m);
            assert_eq!(euc.rank(1e-12), 1);
            assert!(h.is_in_h(0.0));
            assert_eq!(euc_to_h(&euc), h);
        }
        // The map euc → h preserves brackets.
        let mut rng = seeded(17);
        let m = 3;
        let random_euc = |rng: &mut crate::rng::SampleRng| {
            let mut e = DMatrix::zeros(m + 1, m + 1);
            e.view_mut((1, 1), (m, m)).copy_from(&skew(m, 1.0, rng));
            e.view_mut((1, 0), (m, 1)).copy_from(&uniform_vec(m, -1.0, 1.0, rng));
            e
        };
        for _ in 0..20 {
            let (a, b) = (random_euc(&mut rng), random_euc(&mut rng));
            let lhs = euc_to_h(&(&a * &b - &b * &a));
            let rhs = bracket(&euc_to_h(&a), &euc_to_h(&b)).unwrap();
            assert!((lhs.to_coords() - rhs.to_coords()).amax() < 1e-13);
        }
    }

    /// Truncated power series at order 20 after scaling by 2^-k.
    fn series_exp(y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = y.nrows();
        let k = (y.norm().log2().ceil().max(0.0)) as i32 + 2;
        let scaled = y / 2f64.powi(k);
        let mut term = DMatrix::identity(n, n);
        let mut sum = DMatrix::identity(n, n);
        for j in 1..=20 {
            term = &term * &scaled / j as f64;
            sum += &term;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exponential() {
        let m = 3;
        assert!((exp(&AlgebraElement::zero(m)).matrix() - DMatrix::identity(5, 5)).amax() < 1e-15);
        let e1 = AlgebraElement::e_minus(m, 0);
        assert!((exp(&e1).matrix() - series_exp(&e1.to_matrix())).amax() < 1e-12);
        let mut rng = seeded(18);
        for _ in 0..20 {
            let y = AlgebraElement::random(m, 1.5, &mut rng);
            let g = exp(&y);
            GroupElement::from_matrix(g.matrix().clone()).unwrap();
            let rel = (g.matrix() - series_exp(&y.to_matrix())).amax() / g.matrix().amax();
            assert!(rel < 1e-12);
            let d = fd::central(|t| exp(&y.scale(t)).matrix().clone(), 1e-5);
            assert!((d - y.to_matrix()).amax() < 1e-8);
        }
    }

    #[test]
    fn maurer_cartan_form() {
        let mut rng = seeded(19);
        let m = 3;
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let id = GroupElement::identity(m);
        assert_eq!(maurer_cartan(&id, &y.to_matrix()).unwrap(), y);
        for _ in 0..30 {
            let sigma = GroupElement::random(m, 0.8, &mut rng);
            let tau = GroupElement::random(m, 0.8, &mut rng);
            let y = AlgebraElement::random(m, 1.0, &mut rng);
            let xi = sigma.matrix() * y.to_matrix();
            let w = maurer_cartan(&sigma, &xi).unwrap();
            assert!((w.to_coords() - y.to_coords()).amax() < 1e-11);
            let w2 = maurer_cartan(&tau.mul(&sigma), &(tau.matrix() * &xi)).unwrap();
            assert!((w2.to_coords() - w.to_coords()).amax() < 1e-10);
        }
        let bad = DMatrix::identity(5, 5);
        assert!(matches!(maurer_cartan(&id, &bad), Err(Error::NotTangent(_))));
    }

    #[test]
    fn structure_equation_converges_at_second_order() {
        let mut rng = seeded(21);
        for m in 2..5 {
            for _ in 0..10 {
                let fam = TwoParameterFamily::random(m, 0.5, &mut rng);
                let (s, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let (ds, dt) = fam.partials(s, t);
                let num_s = crate::fd::central(|h| fam.sigma(s + h, t).matrix, 1e-6);
                let num_t = crate::fd::central(|h| fam.sigma(s, t + h).matrix, 1e-6);
                assert!((ds - num_s).amax() < 1e-7 && (dt - num_t).amax() < 1e-7);
                let coarse = structure_residual(&fam, s, t, 1e-3).unwrap();
                let fine = structure_residual(&fam, s, t, 5e-4).unwrap();
                assert!(coarse < 1e-4);
                let ratio = coarse / fine;
                assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
            }
        }
    }

    #[test]
    fn cone_action_properties() {
        let mut rng = seeded(20);
        let m = 3;
        for _ in 0..50 {
            let x = uniform_vec(m + 1, -1.0, 1.0, &mut rng).normalize();
            let p = cone_embed(&x, rng.gen_range(0.5..2.0)).unwrap();
            let sigma = GroupElement::random(m, 0.7, &mut rng);
            let tau = GroupElement::random(m, 0.7, &mut rng);
            assert!((cone_action(&GroupElement::identity(m), &p).unwrap().vector() - p.vector()).amax() < 1e-14);
            let q = cone_action(&sigma, &p).unwrap();
            assert!(lorentz_dot(q.vector(), q.vector()).abs() < 1e-10 * q.vector().norm_squared());
            let lhs = cone_action(&sigma.mul(&tau), &p).unwrap();
            let rhs = cone_action(&sigma, &cone_action(&tau, &p).unwrap()).unwrap();
            assert!((lhs.vector() - rhs.vector()).amax() < 1e-10 * (1.0 + lhs.vector().amax()));
        }
    }

    #[test]
    fn model_isometry_examples() {
        let mut rng = seeded(21);
        let m = 3;
        let x = uniform_vec(m + 1, -1.0, 1.0, &mut rng).normalize();
        let (y, s) = model_isometry(&IdentityMap, &x, 1.3).unwrap();
        assert_eq!((y, s), (x.clone(), 1.3));
        let r = orthogonal(m + 1, &mut rng);
        let (y, s) = model_isometry(&RotationMap(r.clone()), &x, 1.3).unwrap();
        assert!((y - &r * &x).amax() < 1e-15 && s == 1.3);
        for _ in 0..50 {
            let sigma = GroupElement::random(m, 0.7, &mut rng);
            let map = MobiusSphereMap::new(&sigma);
            let x = uniform_vec(m + 1, -1.0, 1.0, &mut rng).normalize();
            let s = rng.gen_range(0.5..2.0);
            let (y, t) = model_isometry(&map, &x, s).unwrap();
            let lhs = cone_embed(&y.normalize(), t).unwrap();
            let rhs = cone_action(&sigma, &cone_embed(&x, s).unwrap()).unwrap();
            assert!((lhs.vector() - rhs.vector()).amax() < 1e-10);
        }
        assert!(model_isometry(&IdentityMap, &(&x * 2.0), 1.0).is_err());
        assert!(model_isometry(&IdentityMap, &x, -1.0).is_err());
    }

    #[test]
    fn model_isometry_preserves_degenerate_metric() {
        // f*(s²g_S ⊕ 0) = s²g_S ⊕ 0, tested on curves (x(t), s(t)) on S^m × R_{>0}.
        let mut rng = seeded(22);
        let m = 3;
        for _ in 0..30 {
            let sigma = GroupElement::random(m, 0.7, &mut rng);
            let map = MobiusSphereMap::new(&sigma);
            let x = uniform_vec(m + 1, -1.0, 1.0, &mut rng).normalize();
            let s = rng.gen_range(0.5..2.0);
            let u = uniform_vec(m + 1, -1.0, 1.0, &mut rng);
            let u = &u - &x * x.dot(&u);
            let tau = rng.gen_range(-1.0..1.0);
            let curve = |t: f64| {
                let xt = (&x + &u * t).normalize();
                let (y, st) = model_isometry(&map, &xt, s + tau * t).unwrap();
                let mut v = DVector::zeros(m + 2);
                v.rows_mut(0, m + 1).copy_from(&y);
                v[m + 1] = st;
                v
            };
            let d = fd::central(curve, 1e-5);
            let st = curve(0.0)[m + 1];
            let image = st * st * d.rows(0, m + 1).norm_squared();
            let source = s * s * u.norm_squared();
            assert!((image - source).abs() < 1e-7 * (1.0 + source));
        }
    }
}
