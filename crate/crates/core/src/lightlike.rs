//! Lightlike metrics in normal form: coordinates (s, r₁, …, r_m), Z = ∂_s and
//! h = Σ H_ij(s, r) dr_i dr_j with H positive definite.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::metric::MetricField;
use crate::rng::seeded;

/// Threshold on |det ∂_s H| below which a point counts as non-generic.
pub const GENERIC_THRESHOLD: f64 = 1e-8;

/// An axis-aligned coordinate box.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    /// The box `[lo, hi]` in the first coordinate and `[−r, r]` in the other `m`.
    pub fn slab(lo: f64, hi: f64, m: usize, r: f64) -> Self {
        let mut l = vec![lo];
        let mut h = vec![hi];
        l.extend(std::iter::repeat_n(-r, m));
        h.extend(std::iter::repeat_n(r, m));
        Self::new(l, h)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Uniform sample from the box shrunk by `margin` on every side.
    pub fn sample_inset(&self, margin: f64, rng: &mut impl Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| rng.gen_range(a + margin..b - margin)).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| rng.gen_range(*l..*h)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct LightlikeChart {
    pub m: usize,
    pub domain: Domain,
    pub h: MetricField,
}

impl LightlikeChart {
    pub fn new(m: usize, domain: Domain, h: MetricField) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter("lightlike charts need m ≥ 2".into()));
        }
        check_dim(m + 1, domain.dim())?;
        check_dim(m + 1, h.coord_dim())?;
        check_dim(m, h.size())?;
        Ok(Self { m, domain, h })
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        check_dim(self.m + 1, y.len())?;
        if self.domain.contains(y) {
            Ok(())
        } else {
            Err(Error::OutOfDomain)
        }
    }

    /// H(s, r).
    pub fn spatial(&self, y: &[f64]) -> DMatrix<f64> {
        self.h.eval(y)
    }

    /// ∂_s H.
    pub fn spatial_ds(&self, y: &[f64]) -> DMatrix<f64> {
        self.h.partial(y, 0)
    }

    /// The (m+1)×(m+1) matrix 0 ⊕ H.
    pub fn full_metric(&self, y: &[f64]) -> DMatrix<f64> {
        let m = self.m;
        let mut g = DMatrix::zeros(m + 1, m + 1);
        g.view_mut((1, 1), (m, m)).copy_from(&self.spatial(y));
        g
    }

    /// Sampled check that H is symmetric positive definite.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = seeded(seed);
        for _ in 0..samples {
            let y = self.domain.sample(&mut rng);
            let h = self.spatial(&y);
            if (&h - h.transpose()).amax() > 1e-13 * (1.0 + h.amax()) {
                return Err(Error::InvalidParameter("H not symmetric".into()));
            }
            if h.clone().cholesky().is_none() {
                return Err(Error::InvalidParameter("H not positive definite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadicalReport {
    /// Kernel is exactly one-dimensional and contains ∂_s.
    pub is_line: bool,
    /// |h(∂_s, ·)|.
    pub z_residual: f64,
    pub smallest_sv: f64,
    pub second_sv: f64,
}

pub fn radical_check(chart: &LightlikeChart, y: &[f64]) -> Result<RadicalReport> {
    chart.check(y)?;
    let g = chart.full_metric(y);
    let z_residual = g.column(0).amax();
    let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    let scale = sv.last().copied().unwrap_or(1.0).max(1.0);
    let tol = 1e-10 * scale;
    Ok(RadicalReport { is_line: sv[0] <= tol && sv[1] > tol && z_residual <= tol, z_residual, smallest_sv: sv[0], second_sv: sv[1] })
}

/// ½ H⁻¹ ∂_s H, the matrix of A_Z on E = TN/Rad in the frame ∂_{r_i}.
pub fn a_z(chart: &LightlikeChart, y: &[f64]) -> Result<DMatrix<f64>> {
    chart.check(y)?;
    let h = chart.spatial(y);
    let inv = h.try_inverse().ok_or(Error::Singular("H"))?;
    Ok(inv * chart.spatial_ds(y) * 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericReport {
    pub generic: bool,
    pub min_abs_det: f64,
    pub threshold: f64,
    pub samples: usize,
}

/// Samples the domain and tests |det ∂_s H| ≥ [`GENERIC_THRESHOLD`].
pub fn generic_check(chart: &LightlikeChart, samples: usize, seed: u64) -> GenericReport {
    let mut rng = seeded(seed);
    let min_abs_det = (0..samples.max(1))
        .map(|_| {
            let y = chart.domain.sample(&mut rng);
            chart.spatial_ds(&y).determinant().abs()
        })
        .fold(f64::INFINITY, f64::min);
    GenericReport { generic: min_abs_det >= GENERIC_THRESHOLD, min_abs_det, threshold: GENERIC_THRESHOLD, samples }
}

/// h̄(A_Z⁻¹[u], A_Z⁻¹[v]); u, v are full (m+1)-component tangent vectors and
/// their ∂_s components are ignored.
pub fn rescaled_metric(chart: &LightlikeChart, y: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dim(chart.m + 1, u.len())?;
    check_dim(chart.m + 1, v.len())?;
    let a = a_z(chart, y)?;
    if a.determinant().abs() < GENERIC_THRESHOLD {
        return Err(Error::Singular("A_Z (non-generic point)"));
    }
    let inv = a.try_inverse().ok_or(Error::Singular("A_Z"))?;
    let (ur, vr) = (u.rows(1, chart.m), v.rows(1, chart.m));
    let (au, av) = (&inv * ur, &inv * vr);
    Ok((au.transpose() * chart.spatial(y) * av)[(0, 0)])
}

/// y·t = flow of Z for time log t, i.e. s ↦ s + log t.
pub fn flow_action(chart: &LightlikeChart, y: &[f64], t: f64) -> Result<Vec<f64>> {
    chart.check(y)?;
    if t <= 0.0 {
        return Err(Error::NonPositive("flow parameter"));
    }
    let mut out = y.to_vec();
    out[0] += t.ln();
    if !chart.domain.contains(&out) {
        return Err(Error::OutOfDomain);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::mink::cone_embed;
    use crate::sphere::{round_factor, round_factor_partial, sphere_to_stereo, stereo_to_sphere};

    fn exp_chart(m: usize) -> LightlikeChart {
        let h = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * (2.0 * y[0]).exp());
        LightlikeChart::new(m, Domain::slab(-1.0, 1.0, m, 1.0), h).unwrap()
    }

    /// h = s-dependent metric with nontrivial r-dependence, analytic ∂_s.
    fn wavy_chart() -> LightlikeChart {
        let m = 2;
        let h = MetricField::new(3, 2, |y| {
            let (s, a, b) = (y[0], y[1], y[2]);
            DMatrix::from_row_slice(2, 2, &[2.0 + s.sin() + a * a, 0.3 * s * b, 0.3 * s * b, 1.5 + s * s * (1.0 + b * b)])
        })
        .with_partials(|y, k| {
            let (s, a, b) = (y[0], y[1], y[2]);
            match k {
                0 => DMatrix::from_row_slice(2, 2, &[s.cos(), 0.3 * b, 0.3 * b, 2.0 * s * (1.0 + b * b)]),
                1 => DMatrix::from_row_slice(2, 2, &[2.0 * a, 0.0, 0.0, 0.0]),
                _ => DMatrix::from_row_slice(2, 2, &[0.0, 0.3 * s, 0.3 * s, 2.0 * s * s * b]),
            }
        });
        LightlikeChart::new(m, Domain::slab(0.2, 1.0, m, 1.0), h).unwrap()
    }

    /// ĥ = e^{2s} g_S in stereographic coordinates (s = log of the cone scale).
    fn cone_chart(m: usize) -> LightlikeChart {
        let h = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * ((2.0 * y[0]).exp() * round_factor(&y[1..]))).with_partials(move |y, k| {
            let e = (2.0 * y[0]).exp();
            let f = if k == 0 { 2.0 * e * round_factor(&y[1..]) } else { e * round_factor_partial(&y[1..], k - 1) };
            DMatrix::identity(m, m) * f
        });
        LightlikeChart::new(m, Domain::slab(-1.0, 1.0, m, 2.0), h).unwrap()
    }

    #[test]
    fn radical_examples() {
        let c = exp_chart(3);
        let r = radical_check(&c, &[0.2, 0.1, 0.0, -0.3]).unwrap();
        assert!(r.is_line && r.z_residual == 0.0);
        let degenerate = MetricField::new(3, 2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let d = LightlikeChart::new(2, Domain::slab(-1.0, 1.0, 2, 1.0), degenerate).unwrap();
        assert!(!radical_check(&d, &[0.0, 0.0, 0.0]).unwrap().is_line);
        let cone = cone_chart(3);
        assert!(radical_check(&cone, &[0.3, 0.5, -0.2, 0.9]).unwrap().is_line);
        assert_eq!(radical_check(&cone, &[3.0, 0.0, 0.0, 0.0]), Err(Error::OutOfDomain));
        cone.validate(20, 1).unwrap();
    }

    #[test]
    fn a_z_examples() {
        let c = exp_chart(3);
        let a = a_z(&c, &[0.5, 0.1, 0.2, 0.3]).unwrap();
        assert!((a - DMatrix::identity(3, 3)).amax() < 1e-9);
        let flat = MetricField::new(3, 2, |_| DMatrix::identity(2, 2) * 3.0);
        let f = LightlikeChart::new(2, Domain::slab(-1.0, 1.0, 2, 1.0), flat).unwrap();
        assert!(a_z(&f, &[0.0, 0.0, 0.0]).unwrap().amax() < 1e-12);
    }

    #[test]
    fn a_z_matches_lie_derivative_oracle() {
        // (L_Z h)(∂_i, ∂_j) = Z(h(∂_i, ∂_j)) since [Z, ∂_i] = 0; difference along the flow.
        let c = wavy_chart();
        let mut rng = seeded(31);
        for _ in 0..30 {
            let y = c.domain.sample(&mut rng);
            let y = [y[0].clamp(0.3, 0.9), y[1], y[2]];
            let lie = fd::central(|t| c.spatial(&fd::shifted(&y, 0, t)), 1e-5);
            let oracle = c.spatial(&y).try_inverse().unwrap() * lie * 0.5;
            let a = a_z(&c, &y).unwrap();
            assert!((&a - oracle).amax() < 1e-7);
            let ha = c.spatial(&y) * &a;
            assert!((&ha - ha.transpose()).amax() < 1e-9);
        }
    }

    #[test]
    fn genericity() {
        assert!(generic_check(&exp_chart(3), 50, 1).generic);
        let flat = MetricField::new(4, 3, |y| DMatrix::identity(3, 3) * (1.0 + y[1] * y[1]));
        let f = LightlikeChart::new(3, Domain::slab(-1.0, 1.0, 3, 1.0), flat).unwrap();
        assert!(!generic_check(&f, 50, 1).generic);
        // Reparametrising s ↦ 2s scales Z; the verdict is unchanged.
        let m = 3;
        let h = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * (4.0 * y[0]).exp());
        let fast = LightlikeChart::new(m, Domain::slab(-0.5, 0.5, m, 1.0), h).unwrap();
        assert!(generic_check(&fast, 50, 2).generic);
    }

    #[test]
    fn rescaled_metric_examples() {
        let mut rng = seeded(32);
        let c = exp_chart(3);
        let y = [0.1, 0.2, 0.3, 0.4];
        let u = crate::rng::uniform_vec(4, -1.0, 1.0, &mut rng);
        let v = crate::rng::uniform_vec(4, -1.0, 1.0, &mut rng);
        let h = c.full_metric(&y);
        let huv = (u.transpose() * &h * &v)[(0, 0)];
        assert!((rescaled_metric(&c, &y, &u, &v).unwrap() - huv).abs() < 1e-8);
        // A_Z = τ I gives h/τ².
        let m = 3;
        let tau = 2.5;
        let hm = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * (2.0 * tau * y[0]).exp());
        let ct = LightlikeChart::new(m, Domain::slab(-1.0, 1.0, m, 1.0), hm).unwrap();
        let huv = (u.transpose() * ct.full_metric(&y) * &v)[(0, 0)];
        assert!((rescaled_metric(&ct, &y, &u, &v).unwrap() - huv / (tau * tau)).abs() < 1e-9);
        // Radical components are ignored.
        let mut u2 = u.clone();
        u2[0] += 3.0;
        assert_eq!(rescaled_metric(&ct, &y, &u2, &v).unwrap(), rescaled_metric(&ct, &y, &u, &v).unwrap());
    }

    #[test]
    fn rescaled_metric_inverts_forward_map() {
        let c = wavy_chart();
        let mut rng = seeded(33);
        for _ in 0..20 {
            let y = c.domain.sample(&mut rng);
            let a = a_z(&c, &y).unwrap();
            let u = crate::rng::uniform_vec(3, -1.0, 1.0, &mut rng);
            let v = crate::rng::uniform_vec(3, -1.0, 1.0, &mut rng);
            // Forward: u' = A_Z u on the spatial part; then the rescaled metric undoes it.
            let lift = |w: &DVector<f64>| {
                let mut out = w.clone();
                let sp = &a * w.rows(1, 2);
                out.rows_mut(1, 2).copy_from(&sp);
                out
            };
            let value = rescaled_metric(&c, &y, &lift(&u), &lift(&v)).unwrap();
            let huv = (u.transpose() * c.full_metric(&y) * &v)[(0, 0)];
            assert!((value - huv).abs() < 1e-9 * (1.0 + huv.abs()));
        }
        let flat = MetricField::new(3, 2, |_| DMatrix::identity(2, 2));
        let f = LightlikeChart::new(2, Domain::slab(-1.0, 1.0, 2, 1.0), flat).unwrap();
        let z = DVector::zeros(3);
        assert!(rescaled_metric(&f, &[0.0, 0.0, 0.0], &z, &z).is_err());
    }

    #[test]
    fn flow() {
        let c = exp_chart(2);
        let y = [0.1, 0.2, 0.3];
        assert_eq!(flow_action(&c, &y, 1.0).unwrap(), y.to_vec());
        let e = 0.2f64.exp();
        let a = flow_action(&c, &flow_action(&c, &y, e).unwrap(), e).unwrap();
        let b = flow_action(&c, &y, e * e).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15);
        assert_eq!(flow_action(&c, &y, 100.0), Err(Error::OutOfDomain));
        // Cone chart: the flow is scaling of the cone point.
        let cone = cone_chart(3);
        let y = [0.2, 0.3, -0.4, 0.5];
        let t = 1.7;
        let moved = flow_action(&cone, &y, t).unwrap();
        let v = cone_embed(&stereo_to_sphere(&y[1..]), y[0].exp()).unwrap();
        let w = cone_embed(&stereo_to_sphere(&moved[1..]), moved[0].exp()).unwrap();
        assert!((w.vector() - v.vector() * t).amax() < 1e-14);
        let back = sphere_to_stereo(&stereo_to_sphere(&moved[1..]));
        assert!((back[0] - y[1]).abs() < 1e-14);
    }
}
