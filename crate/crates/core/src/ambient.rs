//! Ambient Lorentzian metrics around a lightlike manifold given by a family of
//! Riemannian metrics g_s:
//!
//! g^σ = ds⊗d(ρs) + d(ρs)⊗ds + σ(ρ)² g_s
//!
//! on coordinates (ρ, x¹, …, x^m, s). The lightlike manifold sits at ρ = 0
//! with Z = s∂_s. Closed forms for the connection and curvature of g^σ are
//! provided for cross-checking against the numerical routines.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cartan::{cartan_rank_test, expansion, extract_z_omega, frame_action, h_omega_matrix, nabla_z, random_frame, LightlikeImmersion};
use crate::error::{check_dim, Error, Result};
use crate::fd;
use crate::lie::HElement;
use crate::lightlike::{generic_check, Domain, LightlikeChart};
use crate::lorentz::{christoffels_of, LorentzChart};
use crate::metric::MetricField;
use crate::mink::canonical_metric;
use crate::rng::stream;
use crate::sphere::{round_factor, round_factor_partial, stereo_jacobian, stereo_to_sphere};

type FamilyFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
type FamilyPartial = Arc<dyn Fn(f64, &[f64], usize) -> DMatrix<f64> + Send + Sync>;
/// ε(s) with its first two derivatives.
pub type ScaleFn = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;

/// Default ρ half-width.
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_S_RANGE: (f64, f64) = (0.5, 2.0);

/// s ↦ g_s on a chart of M, with ∂_s, ∂_s² and ∂_{x_k}.
#[derive(Clone)]
pub struct MetricFamily {
    pub m: usize,
    pub label: String,
    gs: FamilyFn,
    ds: FamilyFn,
    dss: FamilyFn,
    dx: FamilyPartial,
    pub s_range: (f64, f64),
    pub x_domain: Domain,
}

impl std::fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricFamily")
            .field("m", &self.m)
            .field("label", &self.label)
            .field("s_range", &self.s_range)
            .field("x_domain", &self.x_domain)
            .finish()
    }
}

impl MetricFamily {
    pub fn new(
        m: usize,
        label: impl Into<String>,
        gs: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        ds: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        dss: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        dx: impl Fn(f64, &[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            m,
            label: label.into(),
            gs: Arc::new(gs),
            ds: Arc::new(ds),
            dss: Arc::new(dss),
            dx: Arc::new(dx),
            s_range: DEFAULT_S_RANGE,
            x_domain: Domain::new(vec![-1.0; m], vec![1.0; m]),
        }
    }

    pub fn with_s_range(mut self, lo: f64, hi: f64) -> Self {
        self.s_range = (lo, hi);
        self
    }

    pub fn with_x_domain(mut self, domain: Domain) -> Self {
        self.x_domain = domain;
        self
    }

    /// ε(s)² times the round metric of S^m in stereographic coordinates.
    pub fn warped(m: usize, label: impl Into<String>, eps: ScaleFn) -> Self {
        let (e1, e2, e3) = (eps.clone(), eps.clone(), eps.clone());
        Self::new(
            m,
            label,
            move |s, x| {
                let (e, _, _) = eps(s);
                DMatrix::identity(m, m) * (e * e * round_factor(x))
            },
            move |s, x| {
                let (e, d, _) = e1(s);
                DMatrix::identity(m, m) * (2.0 * e * d * round_factor(x))
            },
            move |s, x| {
                let (e, d, dd) = e2(s);
                DMatrix::identity(m, m) * (2.0 * (d * d + e * dd) * round_factor(x))
            },
            move |s, x, k| {
                let (e, _, _) = e3(s);
                DMatrix::identity(m, m) * (e * e * round_factor_partial(x, k))
            },
        )
    }

    /// g_s = s² g_{S^m}.
    pub fn cone(m: usize) -> Self {
        Self::warped(m, "cone", Arc::new(|s| (s, 1.0, 0.0)))
    }

    /// g_s = s^{2p} g_{S^m}.
    pub fn warped_power(m: usize, p: f64) -> Self {
        Self::warped(m, format!("warped-power-{p}"), Arc::new(move |s| (s.powf(p), p * s.powf(p - 1.0), p * (p - 1.0) * s.powf(p - 2.0))))
    }

    /// g_s = (s + s²/4)² g_{S^m}.
    pub fn warped_quadratic(m: usize) -> Self {
        Self::warped(m, "warped-quadratic", Arc::new(|s| (s + 0.25 * s * s, 1.0 + 0.5 * s, 0.5)))
    }

    /// g_s = g_{S^m}, independent of s.
    pub fn static_sphere(m: usize) -> Self {
        Self::warped(m, "static", Arc::new(|_| (1.0, 0.0, 0.0)))
    }

    /// g_s = (1 − 2(m−1) log s) g_{S^m}: the shrinking Ricci flow with t = log s.
    pub fn ricci_flow(m: usize) -> Self {
        let k = 2.0 * (m as f64 - 1.0);
        let lim = (1.0 / k).exp();
        Self::warped(
            m,
            "ricci-flow",
            Arc::new(move |s| {
                let f = 1.0 - k * s.ln();
                let e = f.sqrt();
                let d = -k / (2.0 * s * e);
                // d/ds of −k/(2 s e): k/(2s²e) + k e'/(2 s e²)
                let dd = k / (2.0 * s * s * e) + k * d / (2.0 * s * e * e);
                (e, d, dd)
            }),
        )
        .with_s_range(0.5, 0.9 * lim)
    }

    /// diag(s², 1, …, 1) times the round metric: not conformal to a fixed metric.
    pub fn anisotropic(m: usize) -> Self {
        let diag = move |x: &[f64], a: f64, b: f64| {
            let mut d = DMatrix::identity(m, m) * (b * round_factor(x));
            d[(0, 0)] = a * round_factor(x);
            d
        };
        Self::new(
            m,
            "anisotropic",
            move |s, x| diag(x, s * s, 1.0),
            move |s, x| diag(x, 2.0 * s, 0.0),
            move |_, x| diag(x, 2.0, 0.0),
            move |s, x, k| {
                let mut d = DMatrix::identity(m, m) * round_factor_partial(x, k);
                d[(0, 0)] *= s * s;
                d
            },
        )
    }

    /// s² times the product of two round spheres S^a × S^b, with stereographic
    /// coordinates on each factor.
    pub fn sphere_product_cone(a: usize, b: usize) -> Self {
        let m = a + b;
        let block = move |fa: f64, fb: f64| {
            let mut d = DMatrix::zeros(m, m);
            for i in 0..a {
                d[(i, i)] = fa;
            }
            for i in a..m {
                d[(i, i)] = fb;
            }
            d
        };
        let base = move |x: &[f64]| block(round_factor(&x[..a]), round_factor(&x[a..]));
        Self::new(
            m,
            format!("cone-s{a}xs{b}"),
            move |s, x| base(x) * (s * s),
            move |s, x| base(x) * (2.0 * s),
            move |_, x| base(x) * 2.0,
            move |s, x, k| {
                let (fa, fb) = if k < a { (round_factor_partial(&x[..a], k), 0.0) } else { (0.0, round_factor_partial(&x[a..], k - a)) };
                block(fa, fb) * (s * s)
            },
        )
    }

    pub fn gs(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        (self.gs)(s, x)
    }

    pub fn ds(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        (self.ds)(s, x)
    }

    pub fn dss(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        (self.dss)(s, x)
    }

    pub fn dx(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        (self.dx)(s, x, k)
    }

    /// K = ½ g_s⁻¹ ∂_s g_s.
    pub fn k_matrix(&self, s: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let inv = self.gs(s, x).try_inverse().ok_or(Error::Singular("g_s"))?;
        Ok(inv * self.ds(s, x) * 0.5)
    }

    /// Sampled positive-definiteness.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = stream(seed, 0);
        for _ in 0..samples {
            let s = rand::Rng::gen_range(&mut rng, self.s_range.0..self.s_range.1);
            let x = self.x_domain.sample(&mut rng);
            let g = self.gs(s, &x);
            if g.symmetric_eigen().eigenvalues.min() <= 0.0 {
                return Err(Error::NonPositive("g_s"));
            }
        }
        Ok(())
    }

    /// The normal-form chart (τ, x) with s = e^{μτ}, so Z = ∂_τ = μ s∂_s.
    pub fn to_lightlike_chart(&self, mu: f64) -> Result<LightlikeChart> {
        if mu <= 0.0 {
            return Err(Error::NonPositive("μ"));
        }
        let m = self.m;
        let (f1, f2) = (self.clone(), self.clone());
        let h = MetricField::new(m + 1, m, move |y| f1.gs((mu * y[0]).exp(), &y[1..])).with_partials(move |y, k| {
            let s = (mu * y[0]).exp();
            if k == 0 {
                f2.ds(s, &y[1..]) * (mu * s)
            } else {
                f2.dx(s, &y[1..], k - 1)
            }
        });
        let mut lo = vec![self.s_range.0.ln() / mu];
        let mut hi = vec![self.s_range.1.ln() / mu];
        lo.extend(&self.x_domain.lo);
        hi.extend(&self.x_domain.hi);
        LightlikeChart::new(m, Domain::new(lo, hi), h)
    }
}

/// σ(ρ) with σ′ and σ″.
#[derive(Clone)]
pub struct Sigma {
    pub label: String,
    f: Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>,
}

impl std::fmt::Debug for Sigma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sigma").field("label", &self.label).finish()
    }
}

impl Sigma {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> (f64, f64, f64) + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn one() -> Self {
        Self::new("1", |_| (1.0, 0.0, 0.0))
    }

    /// 1 + cρ.
    pub fn linear(c: f64) -> Self {
        Self::new(format!("1+{c}ρ"), move |r| (1.0 + c * r, c, 0.0))
    }

    /// 1 + ρ².
    pub fn quadratic() -> Self {
        Self::new("1+ρ²", |r| (1.0 + r * r, 2.0 * r, 2.0))
    }

    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        (self.f)(rho)
    }

    fn validate(&self, epsilon: f64) -> Result<()> {
        if (self.eval(0.0).0 - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!("σ(0) = {} ≠ 1", self.eval(0.0).0)));
        }
        for i in 0..=64 {
            let r = -epsilon + 2.0 * epsilon * i as f64 / 64.0;
            if self.eval(r).0 <= 0.0 {
                return Err(Error::NonPositive("σ on (−ε, ε)"));
            }
        }
        Ok(())
    }
}

/// g^σ on (−ε, ε) × x-domain × s-range.
#[derive(Clone, Debug)]
pub struct AmbientChart {
    pub sigma: Sigma,
    pub family: MetricFamily,
    pub epsilon: f64,
}

pub const RHO: usize = 0;

impl AmbientChart {
    pub fn m(&self) -> usize {
        self.family.m
    }

    pub fn dim(&self) -> usize {
        self.family.m + 2
    }

    /// Index of the s coordinate.
    pub fn s_index(&self) -> usize {
        self.family.m + 1
    }

    pub fn point(&self, rho: f64, x: &[f64], s: f64) -> Vec<f64> {
        let mut p = vec![rho];
        p.extend_from_slice(x);
        p.push(s);
        p
    }

    fn split<'a>(&self, p: &'a [f64]) -> (f64, &'a [f64], f64) {
        (p[0], &p[1..=self.m()], p[self.m() + 1])
    }

    pub fn domain(&self) -> Domain {
        let mut lo = vec![-self.epsilon];
        let mut hi = vec![self.epsilon];
        lo.extend(&self.family.x_domain.lo);
        hi.extend(&self.family.x_domain.hi);
        lo.push(self.family.s_range.0);
        hi.push(self.family.s_range.1);
        Domain::new(lo, hi)
    }

    pub fn metric(&self, p: &[f64]) -> DMatrix<f64> {
        let (rho, x, s) = self.split(p);
        let m = self.m();
        let n = m + 2;
        let (sig, _, _) = self.sigma.eval(rho);
        let mut g = DMatrix::zeros(n, n);
        g[(RHO, n - 1)] = s;
        g[(n - 1, RHO)] = s;
        g[(n - 1, n - 1)] = 2.0 * rho;
        g.view_mut((1, 1), (m, m)).copy_from(&(self.family.gs(s, x) * (sig * sig)));
        g
    }

    pub fn metric_partial(&self, p: &[f64], k: usize) -> DMatrix<f64> {
        let (rho, x, s) = self.split(p);
        let m = self.m();
        let n = m + 2;
        let (sig, d, _) = self.sigma.eval(rho);
        let mut out = DMatrix::zeros(n, n);
        if k == RHO {
            out[(n - 1, n - 1)] = 2.0;
            out.view_mut((1, 1), (m, m)).copy_from(&(self.family.gs(s, x) * (2.0 * sig * d)));
        } else if k == n - 1 {
            out[(RHO, n - 1)] = 1.0;
            out[(n - 1, RHO)] = 1.0;
            out.view_mut((1, 1), (m, m)).copy_from(&(self.family.ds(s, x) * (sig * sig)));
        } else {
            out.view_mut((1, 1), (m, m)).copy_from(&(self.family.dx(s, x, k - 1) * (sig * sig)));
        }
        out
    }

    /// The Lorentzian chart, time-oriented by −T.
    pub fn lorentz(&self) -> LorentzChart {
        let n = self.dim();
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        let metric = MetricField::new(n, n, move |p| a.metric(p)).with_partials(move |p, k| b.metric_partial(p, k));
        LorentzChart::new(metric, move |p| -c.frame_fields(p).0).expect("square metric")
    }

    /// (T, E) = (1/√2)[(1 ± ρ/s²)∂_ρ ∓ (1/s)∂_s].
    pub fn frame_fields(&self, p: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (rho, _, s) = self.split(p);
        let n = self.dim();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = DVector::zeros(n);
        let mut e = DVector::zeros(n);
        t[RHO] = r * (1.0 + rho / (s * s));
        t[n - 1] = -r / s;
        e[RHO] = r * (1.0 - rho / (s * s));
        e[n - 1] = r / s;
        (t, e)
    }
}

pub fn build_ambient(family: MetricFamily, sigma: Sigma, epsilon: f64) -> Result<AmbientChart> {
    if epsilon <= 0.0 {
        return Err(Error::NonPositive("ε"));
    }
    sigma.validate(epsilon)?;
    family.validate(32, 0)?;
    if family.s_range.0 <= 0.0 {
        return Err(Error::NonPositive("s range"));
    }
    Ok(AmbientChart { sigma, family, epsilon })
}

/// σ = 1 + cρ.
pub fn build_ambient_c(family: MetricFamily, c: f64, epsilon: f64) -> Result<AmbientChart> {
    if 1.0 - c.abs() * epsilon <= 0.0 {
        return Err(Error::NonPositive("1 + cρ on (−ε, ε)"));
    }
    build_ambient(family, Sigma::linear(c), epsilon)
}

/// Items of the closed-form connection. V, W are vectors in the x-directions
/// given by their m components.
#[derive(Clone, Debug, PartialEq)]
pub enum LcItem {
    RhoRho,
    SRho,
    VRho(DVector<f64>),
    SS,
    VS(DVector<f64>),
    VW(DVector<f64>, DVector<f64>),
}

fn embed_x(m: usize, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m + 2);
    out.rows_mut(1, m).copy_from(v);
    out
}

/// Levi-Civita of g_s in the x-directions: Γ_s(V, W).
fn slice_connection(chart: &AmbientChart, s: f64, x: &[f64], v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    let m = chart.m();
    let fam = chart.family.clone();
    let fam2 = chart.family.clone();
    let slice = MetricField::new(m, m, move |x| fam.gs(s, x)).with_partials(move |x, k| fam2.dx(s, x, k));
    Ok(christoffels_of(&slice, x)?.contract(v, w))
}

pub fn lc_closed_form(chart: &AmbientChart, p: &[f64], which: &LcItem) -> Result<DVector<f64>> {
    let m = chart.m();
    let n = m + 2;
    check_dim(n, p.len())?;
    let (rho, x, s) = chart.split(p);
    if s <= 0.0 {
        return Err(Error::NonPositive("s"));
    }
    let (sig, d, _) = chart.sigma.eval(rho);
    if sig <= 0.0 {
        return Err(Error::NonPositive("σ"));
    }
    let mut out = DVector::zeros(n);
    match which {
        LcItem::RhoRho | LcItem::SS => {}
        LcItem::SRho => out[RHO] = 1.0 / s,
        LcItem::VRho(v) => {
            check_dim(m, v.len())?;
            out = embed_x(m, v) * (d / sig);
        }
        LcItem::VS(v) => {
            check_dim(m, v.len())?;
            out = embed_x(m, &(chart.family.k_matrix(s, x)? * v));
        }
        LcItem::VW(v, w) => {
            check_dim(m, v.len())?;
            check_dim(m, w.len())?;
            out = embed_x(m, &slice_connection(chart, s, x, v, w)?);
            let gvw = sig * sig * (v.transpose() * chart.family.gs(s, x) * w)[(0, 0)];
            let g_ds = 0.5 * sig * sig * (v.transpose() * chart.family.ds(s, x) * w)[(0, 0)];
            let c = d / (s * sig) * gvw;
            out[n - 1] -= c;
            out[RHO] += c * 2.0 * rho / s - g_ds / s;
        }
    }
    Ok(out)
}

/// Items of the closed-form curvature.
#[derive(Clone, Debug, PartialEq)]
pub enum RsItem {
    /// R(∂_s, ∂_ρ)∂_ρ = 0.
    SRhoRho,
    /// R(V, ∂_ρ)∂_ρ = −(σ″/σ)V.
    VRhoRho(DVector<f64>),
    /// R(∂_ρ, ∂_s)∂_s = 0.
    RhoSS,
    /// R(V, ∂_s)∂_s = −(∂_sK + K²)V.
    VSS(DVector<f64>),
    /// R(V, ∂_ρ)∂_s = (σ′/σ)(V/s − KV).
    VRhoS(DVector<f64>),
}

pub fn rs_closed_form(chart: &AmbientChart, p: &[f64], which: &RsItem) -> Result<DVector<f64>> {
    let m = chart.m();
    let n = m + 2;
    check_dim(n, p.len())?;
    let (rho, x, s) = chart.split(p);
    if s <= 0.0 {
        return Err(Error::NonPositive("s"));
    }
    let (sig, d, dd) = chart.sigma.eval(rho);
    if sig <= 0.0 {
        return Err(Error::NonPositive("σ"));
    }
    Ok(match which {
        RsItem::SRhoRho | RsItem::RhoSS => DVector::zeros(n),
        RsItem::VRhoRho(v) => {
            check_dim(m, v.len())?;
            embed_x(m, v) * (-dd / sig)
        }
        RsItem::VSS(v) => {
            check_dim(m, v.len())?;
            let fam = &chart.family;
            let inv = fam.gs(s, x).try_inverse().ok_or(Error::Singular("g_s"))?;
            let ds = fam.ds(s, x);
            let k = &inv * &ds * 0.5;
            let dk = (-(&inv * &ds * &inv * &ds) + &inv * fam.dss(s, x)) * 0.5;
            embed_x(m, &(-(dk + &k * &k) * v))
        }
        RsItem::VRhoS(v) => {
            check_dim(m, v.len())?;
            let k = chart.family.k_matrix(s, x)?;
            embed_x(m, &((v / s - k * v) * (d / sig)))
        }
    })
}

/// Ric(∂_ρ, ∂_ρ) = −mσ″/σ.
pub fn ricci_rho_rho_closed_form(chart: &AmbientChart, rho: f64) -> f64 {
    let (sig, _, dd) = chart.sigma.eval(rho);
    -(chart.m() as f64) * dd / sig
}

/// The ρ = 0 inclusion (τ, x) ↦ (0, x, e^{μτ}), with Z = ∂_τ = μ s∂_s.
pub fn embed_rho_zero_scaled(chart: &AmbientChart, mu: f64) -> Result<LightlikeImmersion> {
    let m = chart.m();
    let n = m + 2;
    let lchart = chart.family.to_lightlike_chart(mu)?;
    let imm = LightlikeImmersion::new(chart.lorentz(), lchart, move |y| {
        let mut p = DVector::zeros(n);
        p.rows_mut(1, m).copy_from_slice(&y[1..]);
        p[n - 1] = (mu * y[0]).exp();
        p
    })?;
    Ok(imm.with_jacobian(move |y| {
        let mut j = DMatrix::zeros(n, m + 1);
        j[(n - 1, 0)] = mu * (mu * y[0]).exp();
        for i in 0..m {
            j[(i + 1, i + 1)] = 1.0;
        }
        j
    }))
}

/// The ρ = 0 inclusion with Z = s∂_s.
pub fn embed_rho_zero(chart: &AmbientChart) -> Result<LightlikeImmersion> {
    embed_rho_zero_scaled(chart, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub generic: bool,
    pub samples: usize,
    pub rank_passes: usize,
    pub rank_failures: usize,
    /// Frames where the ω verdict disagrees with invertibility of ∇̄Z.
    pub inconsistent_verdicts: usize,
    /// max |λ − 1|.
    pub expansion_deviation: f64,
    /// max |h^c([∇̄Z]⁻¹u, [∇̄Z]⁻¹v) − h(u, v)| / max|h|.
    pub rescaled_h_deviation: f64,
    /// max |Z^c − Z|.
    pub z_deviation: f64,
    /// max |h^c − h| / max|h|; zero exactly when [∇̄Z] is an isometry.
    pub h_deviation: f64,
}

/// Builds g^c, embeds N at ρ = 0 and checks that ω^c is a Cartan connection
/// with h^c rescaled by [∇̄Z]⁻¹ equal to h and Z^c = Z.
pub fn ambient_pipeline(family: MetricFamily, c: f64, epsilon: f64, samples: usize, seed: u64) -> Result<PipelineReport> {
    let chart = build_ambient_c(family, c, epsilon)?;
    let imm = embed_rho_zero(&chart)?;
    let generic = generic_check(&imm.chart, samples.max(8), seed).generic;
    let m = chart.m();
    let mut report = PipelineReport {
        generic,
        samples,
        rank_passes: 0,
        rank_failures: 0,
        inconsistent_verdicts: 0,
        expansion_deviation: 0.0,
        rescaled_h_deviation: 0.0,
        z_deviation: 0.0,
        h_deviation: 0.0,
    };
    for i in 0..samples {
        let mut rng = stream(seed, i as u64);
        let b = random_frame(&imm.chart, &mut rng)?;
        let lambda = expansion(&imm, &b.y)?;
        report.expansion_deviation = report.expansion_deviation.max((lambda - 1.0).abs());
        let test = cartan_rank_test(&imm, &b)?;
        if !test.consistent() {
            report.inconsistent_verdicts += 1;
        }
        if !test.omega.invertible {
            report.rank_failures += 1;
            continue;
        }
        report.rank_passes += 1;
        let h = imm.chart.full_metric(&b.y);
        let scale = h.amax();
        let ho = h_omega_matrix(&imm, &b)?;
        let w = nabla_z(&imm, &b.y)?.matrix;
        let winv = w.try_inverse().ok_or(Error::Singular("∇̄Z"))?;
        let rescaled = winv.transpose() * &ho * &winv;
        report.rescaled_h_deviation = report.rescaled_h_deviation.max((rescaled - &h).amax() / scale);
        report.h_deviation = report.h_deviation.max((ho - &h).amax() / scale);
        let z = extract_z_omega(&imm, &b)?;
        let mut e0 = DVector::zeros(m + 1);
        e0[0] = 1.0;
        report.z_deviation = report.z_deviation.max((z - e0).amax());
        // Frame independence: the same quantities through b·σ.
        let bs = frame_action(&b, &HElement::random(m, &mut rng));
        let zs = extract_z_omega(&imm, &bs)?;
        report.z_deviation = report.z_deviation.max((zs - extract_z_omega(&imm, &b)?).amax());
    }
    Ok(report)
}

/// The FG cone metric over the round S^m: g^c with g_s = s²g_{S^m} and c = 1/2,
/// together with its realization α in L^{m+2}.
#[derive(Clone, Debug)]
pub struct FgCone {
    pub chart: AmbientChart,
}

pub fn fg_cone_metric(m: usize) -> Result<FgCone> {
    if m < 2 {
        return Err(Error::InvalidParameter("m ≥ 2 required".into()));
    }
    Ok(FgCone { chart: build_ambient_c(MetricFamily::cone(m), 0.5, DEFAULT_EPSILON)? })
}

impl FgCone {
    /// α(ρ, x, s) = ((1 − ρ/2)s, (1 + ρ/2)s·p(x)) in canonical coordinates.
    pub fn alpha(&self, p: &[f64]) -> DVector<f64> {
        let m = self.chart.m();
        let (rho, x, s) = self.chart.split(p);
        let sp = stereo_to_sphere(x);
        let mut out = DVector::zeros(m + 2);
        out[0] = (1.0 - 0.5 * rho) * s;
        out.rows_mut(1, m + 1).copy_from(&(sp * ((1.0 + 0.5 * rho) * s)));
        out
    }

    pub fn alpha_jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.chart.m();
        let n = m + 2;
        let (rho, x, s) = self.chart.split(p);
        let sp = stereo_to_sphere(x);
        let dp = stereo_jacobian(x);
        let mut j = DMatrix::zeros(n, n);
        j[(0, RHO)] = -0.5 * s;
        j[(0, n - 1)] = 1.0 - 0.5 * rho;
        for r in 0..=m {
            j[(r + 1, RHO)] = 0.5 * s * sp[r];
            j[(r + 1, n - 1)] = (1.0 + 0.5 * rho) * sp[r];
            for c in 0..m {
                j[(r + 1, c + 1)] = (1.0 + 0.5 * rho) * s * dp[(r, c)];
            }
        }
        j
    }

    /// max |α*⟨,⟩ − g| over samples, with the Jacobian of α taken by differences.
    pub fn alpha_pullback_residual(&self, samples: usize, seed: u64) -> f64 {
        let m = self.chart.m();
        let eta = canonical_metric(m);
        let dom = self.chart.domain();
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let mut rng = stream(seed, i as u64);
            let p = dom.sample_inset(0.01, &mut rng);
            let n = m + 2;
            let mut j = DMatrix::zeros(n, n);
            for k in 0..n {
                j.set_column(k, &fd::central_richardson(|t| self.alpha(&fd::shifted(&p, k, t)), fd::OUTER_STEP));
            }
            let pulled = j.transpose() * &eta * &j;
            worst = worst.max((pulled - self.chart.metric(&p)).amax());
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedVerdict {
    pub warped: bool,
    /// Largest deviation of g_1⁻¹g_s from a constant multiple of the identity.
    pub deviation: f64,
    /// (s, ε(s)) with ε(s)² the mean eigenvalue of g_1⁻¹g_s.
    pub factors: Vec<(f64, f64)>,
}

/// Whether g_s = ε(s)²g_1 on samples.
pub fn warped_criterion(family: &MetricFamily, samples: usize, seed: u64) -> Result<WarpedVerdict> {
    if samples < 2 {
        return Err(Error::InvalidParameter("warped_criterion needs at least 2 samples".into()));
    }
    let m = family.m;
    let mut rng = stream(seed, 0);
    let mut deviation: f64 = 0.0;
    let mut factors = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s = rand::Rng::gen_range(&mut rng, family.s_range.0..family.s_range.1);
        let mut kappa = None;
        for _ in 0..4 {
            let x = family.x_domain.sample(&mut rng);
            let r = family.gs(1.0, &x).try_inverse().ok_or(Error::Singular("g_1"))? * family.gs(s, &x);
            let k = r.trace() / m as f64;
            deviation = deviation.max((&r - DMatrix::identity(m, m) * k).amax() / k.abs().max(1e-300));
            match kappa {
                None => kappa = Some(k),
                Some(k0) => deviation = deviation.max((k - k0).abs() / k0.abs().max(1e-300)),
            }
        }
        factors.push((s, kappa.unwrap_or(0.0).sqrt()));
    }
    Ok(WarpedVerdict { warped: deviation <= 1e-9, deviation, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{christoffels, ricci_tensor, riemann_tensor};
    use crate::rng::{seeded, uniform_vec};
    use rand::Rng;

    fn sample_point(chart: &AmbientChart, rng: &mut impl Rng) -> Vec<f64> {
        chart.domain().sample_inset(0.02, rng)
    }

    #[test]
    fn metric_structure() {
        let chart = build_ambient_c(MetricFamily::cone(3), 0.5, DEFAULT_EPSILON).unwrap();
        let mut rng = seeded(70);
        for _ in 0..20 {
            let p = sample_point(&chart, &mut rng);
            let g = chart.metric(&p);
            let n = 5;
            assert_eq!(g[(n - 1, n - 1)], 2.0 * p[0]);
            assert_eq!(g[(0, n - 1)], p[n - 1]);
            assert_eq!(g[(0, 0)], 0.0);
            let (t, e) = chart.frame_fields(&p);
            let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
            assert!((ip(&t, &t) + 1.0).abs() < 1e-12 && (ip(&e, &e) - 1.0).abs() < 1e-12 && ip(&t, &e).abs() < 1e-12);
            chart.lorentz().validate_at(&p).unwrap();
        }
        let (t, _) = chart.frame_fields(&chart.point(0.0, &[0.0, 0.0, 0.0], 1.0));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t[0] - r).abs() < 1e-15 && (t[4] + r).abs() < 1e-15);
    }

    #[test]
    fn slices_change_signature() {
        let chart = build_ambient_c(MetricFamily::cone(2), 0.0, DEFAULT_EPSILON).unwrap();
        let x = [0.1, 0.2];
        for (rho, negatives) in [(-0.3, 1), (0.3, 0)] {
            let g = chart.metric(&chart.point(rho, &x, 1.2));
            // The slice ρ = ρ₀ has coordinates (x, s).
            let slice = g.view((1, 1), (3, 3)).into_owned();
            let neg = slice.symmetric_eigen().eigenvalues.iter().filter(|e| **e < 0.0).count();
            assert_eq!(neg, negatives);
        }
    }

    #[test]
    fn analytic_partials_match_differences() {
        let chart = build_ambient(MetricFamily::warped_power(3, 1.5), Sigma::quadratic(), DEFAULT_EPSILON).unwrap();
        let mut rng = seeded(71);
        for _ in 0..10 {
            let p = sample_point(&chart, &mut rng);
            for k in 0..5 {
                let num = fd::central(|t| chart.metric(&fd::shifted(&p, k, t)), 1e-6);
                assert!((num - chart.metric_partial(&p, k)).amax() < 1e-7);
            }
            let s = p[4];
            let x = &p[1..4];
            let fam = &chart.family;
            let num = fd::central(|t| fam.ds(s + t, x), 1e-6);
            assert!((num - fam.dss(s, x)).amax() < 1e-7);
        }
        let rf = MetricFamily::ricci_flow(3);
        let x = [0.2, -0.1, 0.3];
        for s in [0.6, 0.9, 1.1] {
            let num = fd::central(|t| rf.gs(s + t, &x), 1e-6);
            assert!((num - rf.ds(s, &x)).amax() < 1e-7);
            let num = fd::central(|t| rf.ds(s + t, &x), 1e-6);
            assert!((num - rf.dss(s, &x)).amax() < 1e-6);
        }
    }

    #[test]
    fn lc_matches_christoffels() {
        let chart = build_ambient(MetricFamily::warped_power(3, 1.5), Sigma::linear(0.7), DEFAULT_EPSILON).unwrap();
        let lor = chart.lorentz();
        let mut rng = seeded(72);
        let e = |i: usize| {
            let mut v = DVector::zeros(5);
            v[i] = 1.0;
            v
        };
        for _ in 0..20 {
            let p = sample_point(&chart, &mut rng);
            let gam = christoffels(&lor, &p).unwrap();
            let v = uniform_vec(3, -1.0, 1.0, &mut rng);
            let w = uniform_vec(3, -1.0, 1.0, &mut rng);
            let (vv, ww) = (embed_x(3, &v), embed_x(3, &w));
            let cases = [
                (LcItem::RhoRho, gam.contract(&e(0), &e(0))),
                (LcItem::SRho, gam.contract(&e(4), &e(0))),
                (LcItem::VRho(v.clone()), gam.contract(&vv, &e(0))),
                (LcItem::SS, gam.contract(&e(4), &e(4))),
                (LcItem::VS(v.clone()), gam.contract(&vv, &e(4))),
                (LcItem::VW(v.clone(), w.clone()), gam.contract(&vv, &ww)),
            ];
            for (item, num) in cases {
                let closed = lc_closed_form(&chart, &p, &item).unwrap();
                assert!((closed - num).amax() < 1e-9, "{item:?}");
            }
        }
        let p = chart.point(0.1, &[0.0, 0.0, 0.0], 2.0);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let out = lc_closed_form(&chart, &p, &LcItem::VRho(v)).unwrap();
        assert!((out[1] - 0.7 / 1.07).abs() < 1e-15);
    }

    #[test]
    fn rs_matches_riemann() {
        for sigma in [Sigma::one(), Sigma::linear(1.0), Sigma::quadratic()] {
            let chart = build_ambient(MetricFamily::warped_power(3, 1.5), sigma, DEFAULT_EPSILON).unwrap();
            let lor = chart.lorentz();
            let mut rng = seeded(73);
            let e = |i: usize| {
                let mut v = DVector::zeros(5);
                v[i] = 1.0;
                v
            };
            for _ in 0..5 {
                let p = sample_point(&chart, &mut rng);
                let r = riemann_tensor(&lor, &p).unwrap();
                let v = uniform_vec(3, -1.0, 1.0, &mut rng);
                let vv = embed_x(3, &v);
                let cases = [
                    (RsItem::SRhoRho, r.apply(&e(4), &e(0), &e(0))),
                    (RsItem::VRhoRho(v.clone()), r.apply(&vv, &e(0), &e(0))),
                    (RsItem::RhoSS, r.apply(&e(0), &e(4), &e(4))),
                    (RsItem::VSS(v.clone()), r.apply(&vv, &e(4), &e(4))),
                    (RsItem::VRhoS(v.clone()), r.apply(&vv, &e(0), &e(4))),
                ];
                for (item, num) in cases {
                    let closed = rs_closed_form(&chart, &p, &item).unwrap();
                    assert!((closed - num).amax() < 1e-6, "{item:?}");
                }
                let ric = ricci_tensor(&lor, &p).unwrap();
                assert!((ric[(0, 0)] - ricci_rho_rho_closed_form(&chart, p[0])).abs() < 1e-6);
            }
        }
    }

    /// The printed value R(∂_ρ,∂_s)∂_s = −(2/s²)∂_ρ is refuted: the numerical
    /// curvature at (0, x, 2) is zero, not −½∂_ρ.
    #[test]
    fn rho_s_s_curvature_vanishes() {
        let chart = build_ambient_c(MetricFamily::cone(3), 0.5, DEFAULT_EPSILON).unwrap();
        let p = chart.point(0.0, &[0.1, 0.2, 0.3], 2.0);
        let mut er = DVector::zeros(5);
        er[0] = 1.0;
        let mut es = DVector::zeros(5);
        es[4] = 1.0;
        let r = riemann_tensor(&chart.lorentz(), &p).unwrap().apply(&er, &es, &es);
        assert!(r.amax() < 1e-8);
        assert!((r[0] + 0.5).abs() > 0.4);
    }

    #[test]
    fn cone_family_is_ricci_flat_at_half() {
        for m in [2, 3] {
            let fg = fg_cone_metric(m).unwrap();
            let lor = fg.chart.lorentz();
            let mut rng = seeded(74);
            for _ in 0..5 {
                let p = sample_point(&fg.chart, &mut rng);
                assert!(ricci_tensor(&lor, &p).unwrap().amax() < 1e-6);
            }
            assert!(fg.alpha_pullback_residual(10, 1) < 1e-9);
            let p = sample_point(&fg.chart, &mut rng);
            let j = fg.alpha_jacobian(&p);
            let mut num = DMatrix::zeros(m + 2, m + 2);
            for k in 0..m + 2 {
                num.set_column(k, &fd::central(|t| fg.alpha(&fd::shifted(&p, k, t)), 1e-6));
            }
            assert!((j - num).amax() < 1e-8);
        }
        // c = 1 is not Ricci-flat for the round cone.
        let chart = build_ambient_c(MetricFamily::cone(3), 1.0, 0.5).unwrap();
        let p = chart.point(0.2, &[0.1, 0.2, 0.3], 1.1);
        assert!(ricci_tensor(&chart.lorentz(), &p).unwrap().amax() > 1e-2);
    }

    #[test]
    fn embedding_has_unit_expansion() {
        let chart = build_ambient_c(MetricFamily::warped_quadratic(3), 0.3, DEFAULT_EPSILON).unwrap();
        let imm = embed_rho_zero(&chart).unwrap();
        imm.validate(20, 3).unwrap();
        let mut rng = seeded(75);
        for _ in 0..5 {
            let y = imm.chart.domain.sample_inset(0.02, &mut rng);
            assert!((expansion(&imm, &y).unwrap() - 1.0).abs() < 1e-8);
            // B_Z = (s ε′/ε) h̄ agrees with a_z of the chart.
            let s = y[0].exp();
            let ratio = s * (1.0 + 0.5 * s) / (s + 0.25 * s * s);
            let a = crate::lightlike::a_z(&imm.chart, &y).unwrap();
            assert!((a - DMatrix::identity(3, 3) * ratio).amax() < 1e-9);
            let u = uniform_vec(4, -1.0, 1.0, &mut rng);
            let v = uniform_vec(4, -1.0, 1.0, &mut rng);
            let b = crate::cartan::null_second_fundamental_form(&imm, &y, &u, &v).unwrap();
            let h = (u.transpose() * imm.chart.full_metric(&y) * &v)[(0, 0)];
            assert!((b - ratio * h).abs() < 1e-7);
        }
    }

    #[test]
    fn pipeline_on_generic_and_static_families() {
        let r = ambient_pipeline(MetricFamily::cone(3), 0.5, DEFAULT_EPSILON, 4, 1).unwrap();
        assert!(r.generic && r.rank_failures == 0 && r.inconsistent_verdicts == 0);
        assert!(r.rescaled_h_deviation < 1e-6 && r.z_deviation < 1e-7 && r.h_deviation < 1e-6);
        let r = ambient_pipeline(MetricFamily::warped_power(3, 1.5), 0.5, DEFAULT_EPSILON, 4, 2).unwrap();
        assert!(r.rank_passes == 4 && r.rescaled_h_deviation < 1e-5 && r.z_deviation < 1e-7);
        assert!(r.h_deviation > 1e-2);
        let r = ambient_pipeline(MetricFamily::static_sphere(3), 0.5, DEFAULT_EPSILON, 4, 3).unwrap();
        assert!(!r.generic && r.rank_failures == 4 && r.inconsistent_verdicts == 0);
    }

    #[test]
    fn warped_verdicts() {
        let v = warped_criterion(&MetricFamily::cone(3), 10, 1).unwrap();
        assert!(v.warped);
        for (s, e) in &v.factors {
            assert!((s - e).abs() < 1e-12);
        }
        assert!(!warped_criterion(&MetricFamily::anisotropic(3), 10, 1).unwrap().warped);
        assert!(warped_criterion(&MetricFamily::cone(3), 1, 1).is_err());
    }

    #[test]
    fn preconditions() {
        assert!(build_ambient(MetricFamily::cone(2), Sigma::new("bad", |r| (2.0 + r, 1.0, 0.0)), 0.5).is_err());
        assert!(build_ambient_c(MetricFamily::cone(2), 3.0, 0.5).is_err());
        assert!(build_ambient(MetricFamily::cone(2), Sigma::new("neg", |r| (1.0 - 4.0 * r, -4.0, 0.0)), 0.5).is_err());
    }
}
