//! Admissible frames of a lightlike hypersurface, the pulled-back connection
//! form ω = Ψ*(γ), the rank test, extraction of (h^ω, Z^ω), the soldering form,
//! curvature and automorphism checks.
//!
//! Chart coordinates on N are in normal form, so the radical field Z is the
//! first coordinate field. Horizontal directions at a frame b are the tangent
//! vectors T_y s·∂_k of a local section s through b, built by Gram–Schmidt from
//! b's own vectors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::fd;
use crate::lie::{ad_full, exp, AlgebraElement, HElement, QuotientVector};
use crate::lightlike::LightlikeChart;
use crate::lorentz::{christoffels, complete_null_frame, connection_form, riemann_tensor, LorentzChart, NullFrame};
use crate::mink::s_matrix;
use crate::rng::stream;

/// Relative smallest singular value below which ω(b) counts as singular.
pub const RANK_TOL: f64 = 1e-6;
/// Tolerance for admissibility and isometry checks on frames.
pub const FRAME_TOL: f64 = 1e-8;
/// Samples stay this far inside the chart box so difference stencils fit.
pub const SAMPLE_MARGIN: f64 = 0.02;

pub type PointMap = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// ψ: N → M together with the ambient chart and the lightlike chart of N.
#[derive(Clone)]
pub struct LightlikeImmersion {
    pub ambient: LorentzChart,
    pub chart: LightlikeChart,
    psi: PointMap,
    dpsi: Option<JacobianFn>,
    /// Step for derivatives of frames and of Tψ.
    pub step: f64,
}

impl std::fmt::Debug for LightlikeImmersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LightlikeImmersion")
            .field("ambient", &self.ambient)
            .field("chart", &self.chart)
            .field("analytic_jacobian", &self.dpsi.is_some())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImmersionReport {
    pub pullback_residual: f64,
    /// Largest g(Tψ·Z, T) seen; negative when causally oriented.
    pub max_orientation: f64,
    pub samples: usize,
}

impl LightlikeImmersion {
    pub fn new(ambient: LorentzChart, chart: LightlikeChart, psi: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Result<Self> {
        check_dim(chart.m + 2, ambient.dim())?;
        Ok(Self { ambient, chart, psi: Arc::new(psi), dpsi: None, step: fd::OUTER_STEP })
    }

    pub fn with_jacobian(mut self, dpsi: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.dpsi = Some(Arc::new(dpsi));
        self
    }

    pub fn m(&self) -> usize {
        self.chart.m
    }

    pub fn psi(&self, y: &[f64]) -> Vec<f64> {
        (self.psi)(y).as_slice().to_vec()
    }

    /// Tψ at y as an (m+2)×(m+1) matrix.
    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        if let Some(d) = &self.dpsi {
            return d(y);
        }
        let n = self.m() + 2;
        let mut j = DMatrix::zeros(n, self.m() + 1);
        for k in 0..=self.m() {
            let col = fd::central_richardson(|t| (self.psi)(&fd::shifted(y, k, t)), self.step);
            j.set_column(k, &col);
        }
        j
    }

    pub fn z_vector(&self, y: &[f64]) -> DVector<f64> {
        self.jacobian(y).column(0).into_owned()
    }

    /// Checks ψ*(g) = h and g(Tψ·Z, T) < 0 at sampled points.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<ImmersionReport> {
        let mut rng = stream(seed, 0);
        let mut pullback_residual: f64 = 0.0;
        let mut max_orientation = f64::NEG_INFINITY;
        for _ in 0..samples {
            let y = self.chart.domain.sample_inset(SAMPLE_MARGIN, &mut rng);
            let x = self.psi(&y);
            let j = self.jacobian(&y);
            let g = self.ambient.g(&x);
            let h = self.chart.full_metric(&y);
            let r = (j.transpose() * &g * &j - &h).amax() / (1.0 + h.amax());
            pullback_residual = pullback_residual.max(r);
            let z = j.column(0).into_owned();
            let t = self.ambient.time_orientation(&x);
            max_orientation = max_orientation.max(self.ambient.inner(&x, &z, &t));
        }
        if pullback_residual > FRAME_TOL {
            return Err(Error::NotIsometry(pullback_residual));
        }
        if max_orientation >= 0.0 {
            return Err(Error::NotFuturePointing);
        }
        Ok(ImmersionReport { pullback_residual, max_orientation, samples })
    }
}

/// ∇̄Z at y in chart coordinates: column k holds the chart components of
/// ∇̄_{∂_k}Z, which is tangent to N.
#[derive(Clone, Debug, PartialEq)]
pub struct NablaZ {
    pub matrix: DMatrix<f64>,
    /// Largest component of ∇̄_{∂_k}Z transverse to Tψ.
    pub normal_residual: f64,
}

impl NablaZ {
    /// The induced endomorphism of TN/Rad: the spatial block.
    pub fn quotient_block(&self) -> DMatrix<f64> {
        let m = self.matrix.nrows() - 1;
        self.matrix.view((1, 1), (m, m)).into_owned()
    }
}

pub fn nabla_z(imm: &LightlikeImmersion, y: &[f64]) -> Result<NablaZ> {
    let m = imm.m();
    check_dim(m + 1, y.len())?;
    let x = imm.psi(y);
    let j = imm.jacobian(y);
    let z = j.column(0).into_owned();
    let gamma = christoffels(&imm.ambient, &x)?;
    let svd = j.clone().svd(true, true);
    let mut matrix = DMatrix::zeros(m + 1, m + 1);
    let mut normal_residual: f64 = 0.0;
    for k in 0..=m {
        let dz = fd::central_richardson(|t| imm.jacobian(&fd::shifted(y, k, t)).column(0).into_owned(), imm.step);
        let full = dz + gamma.contract(&j.column(k).into_owned(), &z);
        let coeffs = svd.solve(&full, 1e-14).map_err(|_| Error::Singular("Tψ"))?;
        normal_residual = normal_residual.max((&j * &coeffs - &full).amax());
        matrix.set_column(k, &coeffs);
    }
    Ok(NablaZ { matrix, normal_residual })
}

/// λ with ∇̄_Z Z = λZ.
pub fn expansion(imm: &LightlikeImmersion, y: &[f64]) -> Result<f64> {
    let nz = nabla_z(imm, y)?;
    let col = nz.matrix.column(0);
    let off = col.rows(1, imm.m()).amax().max(nz.normal_residual);
    if off > 1e-6 * (1.0 + col.amax()) {
        return Err(Error::NotProportional(off));
    }
    Ok(col[0])
}

/// B_Z([u],[v]) = h̄([∇̄Z][u], [v]).
pub fn null_second_fundamental_form(imm: &LightlikeImmersion, y: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let m = imm.m();
    check_dim(m + 1, u.len())?;
    check_dim(m + 1, v.len())?;
    let nz = nabla_z(imm, y)?;
    let wu = &nz.matrix * u;
    Ok((wu.transpose() * imm.chart.full_metric(y) * v)[(0, 0)])
}

/// K̄ = det h(∇̄_{v_i}Z, v_j) / det h(v_i, v_j) for vectors spanning a
/// complement of the radical.
pub fn kossowski_curvature(imm: &LightlikeImmersion, y: &[f64], vs: &[DVector<f64>]) -> Result<f64> {
    let m = imm.m();
    check_dim(m, vs.len())?;
    let nz = nabla_z(imm, y)?;
    let h = imm.chart.full_metric(y);
    let num = DMatrix::from_fn(m, m, |i, j| ((&nz.matrix * &vs[i]).transpose() * &h * &vs[j])[(0, 0)]);
    let den = DMatrix::from_fn(m, m, |i, j| (vs[i].transpose() * &h * &vs[j])[(0, 0)]);
    let d = den.determinant();
    if d.abs() < 1e-12 {
        return Err(Error::Singular("h on the chosen complement"));
    }
    Ok(num.determinant() / d)
}

/// (Z(y), e₁, …, e_m) with h(e_i, e_j) = δ_ij, stored as chart-coordinate columns.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleFrame {
    pub y: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl AdmissibleFrame {
    pub fn new(chart: &LightlikeChart, y: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let m = chart.m;
        check_dim(m + 1, y.len())?;
        check_dim(m + 1, vectors.nrows())?;
        check_dim(m + 1, vectors.ncols())?;
        let mut z = DVector::zeros(m + 1);
        z[0] = 1.0;
        let rz = (vectors.column(0) - &z).amax();
        if rz > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("first vector is not Z (residual {rz:e})")));
        }
        let h = chart.full_metric(&y);
        let e = vectors.columns(1, m);
        let r = (e.transpose() * &h * e - DMatrix::identity(m, m)).amax();
        if r > FRAME_TOL {
            return Err(Error::InvalidFrame(format!("e_i not h-orthonormal (residual {r:e})")));
        }
        let mut vectors = vectors;
        vectors.set_column(0, &z);
        Ok(Self { y, vectors })
    }

    /// Gram–Schmidt of the coordinate fields ∂₁, …, ∂_m.
    pub fn standard(chart: &LightlikeChart, y: &[f64]) -> Result<Self> {
        let m = chart.m;
        check_dim(m + 1, y.len())?;
        let seed = DMatrix::identity(m + 1, m + 1);
        let vectors = orthonormalized(&chart.full_metric(y), &seed)?;
        Ok(Self { y: y.to_vec(), vectors })
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn m(&self) -> usize {
        self.vectors.ncols() - 1
    }

    /// b⁻¹(v): components of a tangent vector in the frame.
    pub fn coefficients(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.vectors.clone().lu().solve(v).ok_or(Error::Singular("frame"))
    }
}

/// Keeps column 0 and h-orthonormalizes columns 1..m in order.
fn orthonormalized(h: &DMatrix<f64>, seed: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = seed.clone();
    let n = seed.ncols();
    for k in 1..n {
        let mut v = seed.column(k).into_owned();
        for j in 1..k {
            let e = out.column(j).into_owned();
            let c = (v.transpose() * h * &e)[(0, 0)];
            v -= e * c;
        }
        let nrm2 = (v.transpose() * h * &v)[(0, 0)];
        if nrm2 <= 1e-14 {
            return Err(Error::InvalidFrame("frame vectors degenerate mod Z".into()));
        }
        out.set_column(k, &(v / nrm2.sqrt()));
    }
    Ok(out)
}

/// b·σ: the frame vectors times [[1, −wᵀg], [0, g]].
pub fn frame_action(b: &AdmissibleFrame, sigma: &HElement) -> AdmissibleFrame {
    AdmissibleFrame { y: b.y.clone(), vectors: &b.vectors * sigma.quotient_matrix() }
}

/// A section of Q near a frame: Gram–Schmidt of the seed frame's vectors
/// against h at the new point, then an optional constant right translation.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSection {
    seed: AdmissibleFrame,
    right: Option<HElement>,
}

impl LocalSection {
    pub fn through(b: &AdmissibleFrame) -> Self {
        Self { seed: b.clone(), right: None }
    }

    /// s·σ.
    pub fn act(&self, sigma: &HElement) -> Self {
        let right = match &self.right {
            Some(r) => r.compose(sigma),
            None => sigma.clone(),
        };
        Self { seed: self.seed.clone(), right: Some(right) }
    }

    pub fn at(&self, chart: &LightlikeChart, y: &[f64]) -> Result<AdmissibleFrame> {
        check_dim(chart.m + 1, y.len())?;
        let vectors = orthonormalized(&chart.full_metric(y), &self.seed.vectors)?;
        let b = AdmissibleFrame { y: y.to_vec(), vectors };
        Ok(match &self.right {
            Some(r) => frame_action(&b, r),
            None => b,
        })
    }
}

/// Ψ(b) = (Tψ·Z, Tψ·e₁, …, Tψ·e_m, η(b)).
pub fn lift_frame(imm: &LightlikeImmersion, b: &AdmissibleFrame) -> Result<NullFrame> {
    let m = imm.m();
    check_dim(m, b.m())?;
    let pushed = imm.jacobian(&b.y) * &b.vectors;
    let ws: Vec<DVector<f64>> = (1..=m).map(|i| pushed.column(i).into_owned()).collect();
    complete_null_frame(&imm.ambient, &imm.psi(&b.y), &pushed.column(0).into_owned(), &ws)
}

/// A g-valued 1-form on the frame bundle, evaluated on velocities of curves of frames.
pub trait FrameConnection: Sync {
    fn chart(&self) -> &LightlikeChart;

    /// ω(b(0))(ḃ(0)).
    fn omega_curve(&self, curve: &dyn Fn(f64) -> Result<AdmissibleFrame>) -> Result<AlgebraElement>;
}

impl FrameConnection for LightlikeImmersion {
    fn chart(&self) -> &LightlikeChart {
        &self.chart
    }

    fn omega_curve(&self, curve: &dyn Fn(f64) -> Result<AdmissibleFrame>) -> Result<AlgebraElement> {
        let b0 = curve(0.0)?;
        let u0 = lift_frame(self, &b0)?;
        let du = fd::try_central_richardson(|t| Ok::<_, Error>(lift_frame(self, &curve(t)?)?.matrix().clone()), self.step)?;
        let dx = fd::try_central_richardson(|t| Ok::<_, Error>(DVector::from_vec(self.psi(&curve(t)?.y))), self.step)?;
        Ok(connection_form(&self.ambient, &u0, &du, &dx, &AlgebraElement::zero(self.m()))?.value)
    }
}

/// The translation-invariant connection on R^{m+1} × H for the flat lightlike
/// metric 0 ⊕ δ: ω = Ad(σ⁻¹)(ẋ₀E + Σẋ_iE_i) + σ⁻¹σ̇.
#[derive(Clone, Debug)]
pub struct FlatModelConnection {
    pub chart: LightlikeChart,
    pub step: f64,
}

impl FlatModelConnection {
    pub fn new(chart: LightlikeChart) -> Self {
        Self { chart, step: fd::OUTER_STEP }
    }

    /// The H element of a frame in the trivialization: vectors [[1, aᵀ], [0, g]], w = −g a.
    pub fn sigma_of(b: &AdmissibleFrame) -> Result<HElement> {
        let m = b.m();
        let a = DVector::from_fn(m, |i, _| b.vectors[(0, i + 1)]);
        let g = b.vectors.view((1, 1), (m, m)).into_owned();
        let w = -(&g * a);
        HElement::new(w, g)
    }
}

impl FrameConnection for FlatModelConnection {
    fn chart(&self) -> &LightlikeChart {
        &self.chart
    }

    fn omega_curve(&self, curve: &dyn Fn(f64) -> Result<AdmissibleFrame>) -> Result<AlgebraElement> {
        let m = self.chart.m;
        let b0 = curve(0.0)?;
        let sigma = Self::sigma_of(&b0)?.to_group();
        let dsigma = fd::try_central_richardson(|t| Ok::<_, Error>(Self::sigma_of(&curve(t)?)?.to_matrix()), self.step)?;
        let dy = fd::try_central_richardson(|t| Ok::<_, Error>(DVector::from_vec(curve(t)?.y)), self.step)?;
        let mut base = AlgebraElement::grading(m).scale(dy[0]);
        for i in 0..m {
            base = base.add(&AlgebraElement::e_minus(m, i).scale(dy[i + 1]));
        }
        let vertical = crate::lie::maurer_cartan(&sigma, &dsigma)?;
        Ok(ad_full(&sigma.inverse(), &base)?.add(&vertical))
    }
}

/// ω(b)(T_ys·v + ξ_Y) together with its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanSample {
    pub frame: AdmissibleFrame,
    pub v: DVector<f64>,
    pub vertical: AlgebraElement,
    pub value: AlgebraElement,
}

/// ω(s(y))(T_ys·v) for a section s.
pub fn omega_along_section(conn: &dyn FrameConnection, section: &LocalSection, y: &[f64], v: &DVector<f64>) -> Result<AlgebraElement> {
    check_dim(conn.chart().m + 1, v.len())?;
    let chart = conn.chart();
    conn.omega_curve(&|t| section.at(chart, &fd::along(y, v.as_slice(), t)))
}

pub fn omega_eval(conn: &dyn FrameConnection, b: &AdmissibleFrame, v: &DVector<f64>, vertical: &AlgebraElement) -> Result<CartanSample> {
    let m = conn.chart().m;
    check_dim(m, vertical.m())?;
    if !vertical.is_in_h(1e-12) {
        return Err(Error::InvalidParameter("vertical part must lie in h".into()));
    }
    let horizontal = omega_along_section(conn, &LocalSection::through(b), &b.y, v)?;
    Ok(CartanSample { frame: b.clone(), v: v.clone(), vertical: vertical.clone(), value: horizontal.add(vertical) })
}

/// ω evaluated on the fundamental field of X ∈ h, by differentiating t ↦ b·exp(tX).
pub fn omega_fundamental(conn: &dyn FrameConnection, b: &AdmissibleFrame, x: &AlgebraElement) -> Result<AlgebraElement> {
    if !x.is_in_h(1e-12) {
        return Err(Error::InvalidParameter("generator must lie in h".into()));
    }
    conn.omega_curve(&|t| Ok(frame_action(b, &HElement::from_group(&exp(&x.scale(t)))?)))
}

/// |ω(b·σ)(T r_σ·ξ) − Ad(σ⁻¹)ω(b)(ξ)| for ξ = T_ys·v.
pub fn equivariance_residual(conn: &dyn FrameConnection, b: &AdmissibleFrame, v: &DVector<f64>, sigma: &HElement) -> Result<f64> {
    let s = LocalSection::through(b);
    let lhs = omega_along_section(conn, &s.act(sigma), &b.y, v)?;
    let rhs = ad_full(&sigma.inverse().to_group(), &omega_along_section(conn, &s, &b.y, v)?)?;
    Ok((lhs.to_coords() - rhs.to_coords()).amax())
}

/// ω(b) on the basis (T_ys·∂₀, …, T_ys·∂_m, fundamental fields of the h basis),
/// one coordinate column per basis vector.
pub fn connection_matrix(conn: &dyn FrameConnection, b: &AdmissibleFrame) -> Result<DMatrix<f64>> {
    let m = conn.chart().m;
    let d = AlgebraElement::dimension(m);
    let mut mat = DMatrix::zeros(d, d);
    let section = LocalSection::through(b);
    for k in 0..=m {
        let mut e = DVector::zeros(m + 1);
        e[k] = 1.0;
        mat.set_column(k, &omega_along_section(conn, &section, &b.y, &e)?.to_coords());
    }
    for j in (m + 1)..d {
        mat[(j, j)] = 1.0;
    }
    Ok(mat)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankVerdict {
    pub invertible: bool,
    pub smallest_sv: f64,
    /// Smallest over largest singular value.
    pub relative_sv: f64,
}

fn verdict(mat: &DMatrix<f64>) -> RankVerdict {
    let sv = mat.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    let relative_sv = if hi > 0.0 { lo / hi } else { 0.0 };
    RankVerdict { invertible: relative_sv > RANK_TOL, smallest_sv: lo, relative_sv }
}

pub fn connection_rank(conn: &dyn FrameConnection, b: &AdmissibleFrame) -> Result<RankVerdict> {
    Ok(verdict(&connection_matrix(conn, b)?))
}

/// The rank verdict for the pulled-back form, plus the independent verdict
/// from invertibility of ∇̄Z on T_yN.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTest {
    pub omega: RankVerdict,
    pub nabla_z: RankVerdict,
}

impl RankTest {
    pub fn consistent(&self) -> bool {
        self.omega.invertible == self.nabla_z.invertible
    }
}

pub fn cartan_rank_test(imm: &LightlikeImmersion, b: &AdmissibleFrame) -> Result<RankTest> {
    let omega = connection_rank(imm, b)?;
    let nz = nabla_z(imm, &b.y)?;
    let sv = nz.matrix.singular_values();
    let lo = sv.min();
    let relative_sv = lo / sv.max().max(1.0);
    Ok(RankTest { omega, nabla_z: RankVerdict { invertible: relative_sv > RANK_TOL, smallest_sv: lo, relative_sv } })
}

fn require_rank(conn: &dyn FrameConnection, b: &AdmissibleFrame) -> Result<DMatrix<f64>> {
    let mat = connection_matrix(conn, b)?;
    let v = verdict(&mat);
    if !v.invertible {
        return Err(Error::RankFailure(v.relative_sv));
    }
    Ok(mat)
}

/// The g₋₁ parts of ω(T_ys·∂_k) as columns; h^ω = XᵀX in chart coordinates.
fn minus_parts(mat: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    mat.view((1, 0), (m, m + 1)).into_owned()
}

/// h^ω at p(b) as a matrix in chart coordinates.
pub fn h_omega_matrix(conn: &dyn FrameConnection, b: &AdmissibleFrame) -> Result<DMatrix<f64>> {
    let m = conn.chart().m;
    let x = minus_parts(&require_rank(conn, b)?, m);
    Ok(x.transpose() * x)
}

/// h^ω(u, v), computed through the frame b.
pub fn extract_h_omega(conn: &dyn FrameConnection, b: &AdmissibleFrame, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let m = conn.chart().m;
    check_dim(m + 1, u.len())?;
    check_dim(m + 1, v.len())?;
    Ok((u.transpose() * h_omega_matrix(conn, b)? * v)[(0, 0)])
}

/// Z^ω = T_bp·ω(b)⁻¹(E).
pub fn extract_z_omega(conn: &dyn FrameConnection, b: &AdmissibleFrame) -> Result<DVector<f64>> {
    let m = conn.chart().m;
    let mat = require_rank(conn, b)?;
    let c = mat.lu().solve(&AlgebraElement::grading(m).to_coords()).ok_or(Error::Singular("ω(b)"))?;
    Ok(c.rows(0, m + 1).into_owned())
}

/// h^ω([∇̄Z]⁻¹u, [∇̄Z]⁻¹v), which recovers h.
pub fn rescaled_h_omega(imm: &LightlikeImmersion, b: &AdmissibleFrame, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let lu = nabla_z(imm, &b.y)?.matrix.lu();
    let (iu, iv) = (lu.solve(u).ok_or(Error::Singular("∇̄Z"))?, lu.solve(v).ok_or(Error::Singular("∇̄Z"))?);
    extract_h_omega(imm, b, &iu, &iv)
}

/// proj∘ω(b)(T_ys·v + ξ_Y).
pub fn soldering_eval(conn: &dyn FrameConnection, b: &AdmissibleFrame, v: &DVector<f64>, vertical: &AlgebraElement) -> Result<QuotientVector> {
    Ok(omega_eval(conn, b, v, vertical)?.value.quotient())
}

/// The same value read off the frame: b⁻¹(∇̄_vZ). On the cone ∇̄Z = Id and
/// this is b⁻¹(v).
pub fn soldering_closed_form(imm: &LightlikeImmersion, b: &AdmissibleFrame, v: &DVector<f64>) -> Result<QuotientVector> {
    let nz = nabla_z(imm, &b.y)?;
    Ok(QuotientVector::from_vector(&b.coefficients(&(&nz.matrix * v))?))
}

/// The z(g₀) and g₋₁ components of ω(b)(T_ys·v) from the ambient data:
/// (g(Tψ·∇̄_vZ, η(b)), h(∇̄_vZ, e_i)).
pub fn omega_quotient_closed_form(imm: &LightlikeImmersion, b: &AdmissibleFrame, v: &DVector<f64>) -> Result<QuotientVector> {
    let m = imm.m();
    let nz = nabla_z(imm, &b.y)?;
    let d = &nz.matrix * v;
    let frame = lift_frame(imm, b)?;
    let x = imm.psi(&b.y);
    let a = imm.ambient.inner(&x, &(imm.jacobian(&b.y) * &d), &frame.l_minus());
    let h = imm.chart.full_metric(&b.y);
    let xs = DVector::from_fn(m, |i, _| (d.transpose() * &h * b.vectors.column(i + 1))[(0, 0)]);
    Ok(QuotientVector::new(a, xs))
}

/// K^ω(b)(X₁, X₂) = Ψ(b)⁻¹ R(Tψ·v₁, Tψ·v₂) Ψ(b), where v_i are the chart
/// vectors whose horizontal lifts have soldering value X_i.
pub fn curvature_function(imm: &LightlikeImmersion, b: &AdmissibleFrame, x1: &QuotientVector, x2: &QuotientVector) -> Result<AlgebraElement> {
    let m = imm.m();
    check_dim(m, x1.x.len())?;
    check_dim(m, x2.x.len())?;
    let mat = require_rank(imm, b)?;
    let p = mat.view((0, 0), (m + 1, m + 1)).into_owned().lu();
    let v1 = p.solve(&x1.to_vector()).ok_or(Error::Singular("ω(b)"))?;
    let v2 = p.solve(&x2.to_vector()).ok_or(Error::Singular("ω(b)"))?;
    let x = imm.psi(&b.y);
    let j = imm.jacobian(&b.y);
    let r = riemann_tensor(&imm.ambient, &x)?.endo(&(&j * v1), &(&j * v2));
    let f = lift_frame(imm, b)?;
    let k = s_matrix(m) * f.matrix().transpose() * imm.ambient.g(&x) * r * f.matrix();
    Ok(AlgebraElement::from_matrix_projected(&k).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessReport {
    /// max ‖K^ω(X_j, X_k)‖ over quotient basis pairs.
    pub model_flat_residual: f64,
    /// max ‖K^ω(E, X_k)‖.
    pub scale_residual: f64,
    /// max |h^ω − λ²h| relative to |h|, evaluated when either criterion holds.
    pub h_lambda_residual: Option<f64>,
    pub tolerance: f64,
    pub samples: usize,
}

impl FlatnessReport {
    pub fn model_flat(&self) -> bool {
        self.model_flat_residual <= self.tolerance
    }

    pub fn scale_flat(&self) -> bool {
        self.scale_residual <= self.tolerance
    }
}

pub fn random_frame(chart: &LightlikeChart, rng: &mut impl Rng) -> Result<AdmissibleFrame> {
    let y = chart.domain.sample_inset(SAMPLE_MARGIN, rng);
    let b = AdmissibleFrame::standard(chart, &y)?;
    Ok(frame_action(&b, &HElement::random(chart.m, rng)))
}

pub fn flatness_diagnostics(imm: &LightlikeImmersion, samples: usize, seed: u64, tolerance: f64) -> Result<FlatnessReport> {
    let m = imm.m();
    let mut model_flat_residual: f64 = 0.0;
    let mut scale_residual: f64 = 0.0;
    let mut frames = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut rng = stream(seed, i as u64);
        let b = random_frame(&imm.chart, &mut rng)?;
        for j in 0..=m {
            let xj = QuotientVector::basis(m, j);
            for k in (j + 1)..=m {
                let xk = QuotientVector::basis(m, k);
                let kv = curvature_function(imm, &b, &xj, &xk)?.max_abs();
                model_flat_residual = model_flat_residual.max(kv);
                if j == 0 {
                    scale_residual = scale_residual.max(kv);
                }
            }
        }
        frames.push(b);
    }
    let mut report = FlatnessReport { model_flat_residual, scale_residual, h_lambda_residual: None, tolerance, samples };
    if report.model_flat() || report.scale_flat() {
        let mut worst: f64 = 0.0;
        for b in &frames {
            let lambda = expansion(imm, &b.y)?;
            let h = imm.chart.full_metric(&b.y);
            let ho = h_omega_matrix(imm, b)?;
            worst = worst.max((ho - &h * (lambda * lambda)).amax() / h.amax().max(1e-300));
        }
        report.h_lambda_residual = Some(worst);
    }
    Ok(report)
}

/// A diffeomorphism between chart domains of N.
pub trait ChartMap: Sync {
    fn apply(&self, y: &[f64]) -> Vec<f64>;

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let col = fd::central_richardson(|t| DVector::from_vec(self.apply(&fd::shifted(y, k, t))), fd::OUTER_STEP);
            j.set_column(k, &col);
        }
        j
    }
}

/// y ↦ Ly + c.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChartMap {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl ChartMap for AffineChartMap {
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        (&self.linear * DVector::from_column_slice(y) + &self.offset).as_slice().to_vec()
    }

    fn jacobian(&self, _y: &[f64]) -> DMatrix<f64> {
        self.linear.clone()
    }
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A closure-defined map with a difference Jacobian.
pub struct FnChartMap(pub PointFn);

impl ChartMap for FnChartMap {
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        (self.0)(y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreservationReport {
    /// max over frames and j of |ω(b)⁻¹(E_j) − (F*ω)(b)⁻¹(E_j)|.
    pub max_residual: f64,
    /// Deviation of f from an isometry of (h^ω, Z^ω).
    pub isometry_residual: f64,
    pub samples: usize,
}

fn push_frame(chart: &LightlikeChart, f: &dyn ChartMap, b: &AdmissibleFrame) -> Result<AdmissibleFrame> {
    let y = f.apply(&b.y);
    if !chart.domain.contains(&y) {
        return Err(Error::OutOfDomain);
    }
    AdmissibleFrame::new(chart, y, f.jacobian(&b.y) * &b.vectors)
}

/// Certifies numerically whether the frame pushforward of f preserves the
/// ω-horizontal fields ω⁻¹(E_j), j = 0..m.
pub fn horizontal_preservation_check(conn: &dyn FrameConnection, f: &dyn ChartMap, samples: usize, seed: u64) -> Result<PreservationReport> {
    let chart = conn.chart();
    let m = chart.m;
    let d = AlgebraElement::dimension(m);
    let inset = SAMPLE_MARGIN;
    let mut max_residual: f64 = 0.0;
    let mut isometry_residual: f64 = 0.0;
    let mut used = 0;
    let mut draw = 0u64;
    while used < samples {
        if draw > 100 * samples as u64 + 100 {
            return Err(Error::OutOfDomain);
        }
        let mut rng = stream(seed, draw);
        draw += 1;
        let y = chart.domain.sample_inset(inset, &mut rng);
        let fy = f.apply(&y);
        let inner = crate::lightlike::Domain::new(chart.domain.lo.iter().map(|v| v + inset).collect(), chart.domain.hi.iter().map(|v| v - inset).collect());
        if !inner.contains(&fy) {
            continue;
        }
        let b = frame_action(&AdmissibleFrame::standard(chart, &y)?, &HElement::random(m, &mut rng));
        let jf = f.jacobian(&y);

        // Precondition: f*(h^ω) = h^ω and Tf·Z^ω = Z^ω∘f.
        let mb = require_rank(conn, &b)?;
        let bf = AdmissibleFrame::standard(chart, &fy)?;
        let mf_std = require_rank(conn, &bf)?;
        let hy = {
            let x = minus_parts(&mb, m);
            x.transpose() * x
        };
        let hf = {
            let x = minus_parts(&mf_std, m);
            x.transpose() * x
        };
        let zy = mb.clone().lu().solve(&AlgebraElement::grading(m).to_coords()).ok_or(Error::Singular("ω(b)"))?;
        let zf = mf_std.clone().lu().solve(&AlgebraElement::grading(m).to_coords()).ok_or(Error::Singular("ω(b)"))?;
        let iso_h = (jf.transpose() * &hf * &jf - &hy).amax() / (1.0 + hy.amax());
        let iso_z = (&jf * zy.rows(0, m + 1) - zf.rows(0, m + 1)).amax();
        let iso = iso_h.max(iso_z);
        isometry_residual = isometry_residual.max(iso);
        if iso > 1e-6 {
            return Err(Error::NotIsometry(iso));
        }

        // F*ω at b: horizontal columns from pushed section curves; vertical columns
        // are the identity because F commutes with the H action.
        let section = LocalSection::through(&b);
        let mut mf = DMatrix::zeros(d, d);
        for k in 0..=m {
            let col = conn.omega_curve(&|t| push_frame(chart, f, &section.at(chart, &fd::shifted(&y, k, t))?))?;
            mf.set_column(k, &col.to_coords());
        }
        for j in (m + 1)..d {
            mf[(j, j)] = 1.0;
        }
        let (lb, lf) = (mb.lu(), mf.lu());
        let mut targets = vec![AlgebraElement::grading(m)];
        targets.extend((0..m).map(|i| AlgebraElement::e_minus(m, i)));
        for e in targets {
            let c = e.to_coords();
            let a = lb.solve(&c).ok_or(Error::Singular("ω(b)"))?;
            let bb = lf.solve(&c).ok_or(Error::Singular("F*ω(b)"))?;
            max_residual = max_residual.max((a - bb).amax());
        }
        used += 1;
    }
    Ok(PreservationReport { max_residual, isometry_residual, samples })
}
