//! Concrete lightlike immersions used by the scenarios.

use nalgebra::{DMatrix, DVector};

use crate::cartan::LightlikeImmersion;
use crate::error::Result;
use crate::lightlike::{Domain, LightlikeChart};
use crate::lorentz::LorentzChart;
use crate::metric::MetricField;
use crate::sphere::{round_factor, round_factor_partial, stereo_jacobian, stereo_to_sphere};

/// ψ(τ, x) = e^{μτ}(1, p(x)) into flat L^{m+2}; λ = μ and ∇̄Z = μ·Id.
pub fn model_cone(m: usize, mu: f64, step: f64) -> Result<LightlikeImmersion> {
    let h = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * ((2.0 * mu * y[0]).exp() * round_factor(&y[1..]))).with_partials(move |y, k| {
        let f = (2.0 * mu * y[0]).exp();
        let v = if k == 0 { 2.0 * mu * f * round_factor(&y[1..]) } else { f * round_factor_partial(&y[1..], k - 1) };
        DMatrix::identity(m, m) * v
    });
    let chart = LightlikeChart::new(m, Domain::slab(-0.5, 0.5, m, 0.8), h)?;
    let mut imm = LightlikeImmersion::new(LorentzChart::minkowski(m), chart, move |y| {
        let mut v = DVector::zeros(m + 2);
        v[0] = 1.0;
        v.rows_mut(1, m + 1).copy_from(&stereo_to_sphere(&y[1..]));
        v * (mu * y[0]).exp()
    })?
    .with_jacobian(move |y| {
        let e = (mu * y[0]).exp();
        let p = stereo_to_sphere(&y[1..]);
        let dp = stereo_jacobian(&y[1..]);
        let mut j = DMatrix::zeros(m + 2, m + 1);
        j[(0, 0)] = mu * e;
        for r in 0..=m {
            j[(r + 1, 0)] = mu * e * p[r];
            for c in 0..m {
                j[(r + 1, c + 1)] = e * dp[(r, c)];
            }
        }
        j
    });
    imm.step = step;
    Ok(imm)
}

/// Chart coordinates of σ·ψ(y) on the model cone, or None when the image
/// leaves the stereographic chart.
pub fn cone_action_chart(sigma_canonical: &DMatrix<f64>, mu: f64, y: &[f64]) -> Option<Vec<f64>> {
    let m = y.len() - 1;
    let mut v = DVector::zeros(m + 2);
    v[0] = 1.0;
    v.rows_mut(1, m + 1).copy_from(&stereo_to_sphere(&y[1..]));
    let w = sigma_canonical * v * (mu * y[0]).exp();
    if w[0] <= 0.0 || (w[m + 1] / w[0] - 1.0).abs() < 1e-6 {
        return None;
    }
    let p = w.rows(1, m + 1) / w[0];
    let mut out = vec![w[0].ln() / mu];
    out.extend(crate::sphere::sphere_to_stereo(&p.into_owned()));
    Some(out)
}

/// ψ(x₀, x) = (x₀, x, x₀) into flat L^{m+2}: the null hyperplane.
pub fn null_hyperplane(m: usize, step: f64) -> Result<LightlikeImmersion> {
    let chart = flat_lightlike_chart(m)?;
    let mut imm = LightlikeImmersion::new(LorentzChart::minkowski(m), chart, move |y| {
        let mut v = DVector::zeros(m + 2);
        v[0] = y[0];
        v[m + 1] = y[0];
        v.rows_mut(1, m).copy_from_slice(&y[1..]);
        v
    })?
    .with_jacobian(move |_| {
        let mut j = DMatrix::zeros(m + 2, m + 1);
        j[(0, 0)] = 1.0;
        j[(m + 1, 0)] = 1.0;
        for i in 0..m {
            j[(i + 1, i + 1)] = 1.0;
        }
        j
    });
    imm.step = step;
    Ok(imm)
}

/// (R^{m+1}, 0 ⊕ δ, ∂₀) on [−1, 1]^{m+1}.
pub fn flat_lightlike_chart(m: usize) -> Result<LightlikeChart> {
    let h = MetricField::new(m + 1, m, move |_| DMatrix::identity(m, m)).with_partials(move |_, _| DMatrix::zeros(m, m));
    LightlikeChart::new(m, Domain::slab(-1.0, 1.0, m, 1.0), h)
}

/// Parameters of the conformally rescaled plane wave e^{2f}(2du dv + Σdx²)
/// with f = a·v + b·x₁ + c·u, cut along u = 0 with v = (e^{κτ} − 1)/κ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recurrent {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa: f64,
}

impl Recurrent {
    pub fn v_of(&self, tau: f64) -> f64 {
        if self.kappa.abs() < 1e-12 {
            tau
        } else {
            ((self.kappa * tau).exp() - 1.0) / self.kappa
        }
    }

    pub fn dv(&self, tau: f64) -> f64 {
        (self.kappa * tau).exp()
    }

    /// λ = κ + 2a·e^{κτ}.
    pub fn expansion(&self, tau: f64) -> f64 {
        self.kappa + 2.0 * self.a * self.dv(tau)
    }

    /// B_Z = ρ·h̄ with ρ = a·e^{κτ}.
    pub fn umbilic_factor(&self, tau: f64) -> f64 {
        self.a * self.dv(tau)
    }

    /// Coordinates (u, v, x₁..x_m).
    pub fn ambient(&self, m: usize) -> Result<LorentzChart> {
        let n = m + 2;
        let p = *self;
        let grad = move |k: usize| match k {
            0 => p.c,
            1 => p.a,
            2 => p.b,
            _ => 0.0,
        };
        let base = move || {
            let mut g = DMatrix::zeros(n, n);
            g[(0, 1)] = 1.0;
            g[(1, 0)] = 1.0;
            for i in 2..n {
                g[(i, i)] = 1.0;
            }
            g
        };
        let f = move |x: &[f64]| p.a * x[1] + p.b * x[2] + p.c * x[0];
        let metric = MetricField::new(n, n, move |x| base() * (2.0 * f(x)).exp()).with_partials(move |x, k| base() * (2.0 * grad(k) * (2.0 * f(x)).exp()));
        LorentzChart::new(metric, move |_| {
            let mut t = DVector::zeros(n);
            t[0] = -1.0;
            t[1] = 1.0;
            t
        })
    }

    pub fn immersion(&self, m: usize, step: f64) -> Result<LightlikeImmersion> {
        let p = *self;
        let n = m + 2;
        let h = MetricField::new(m + 1, m, move |y| DMatrix::identity(m, m) * (2.0 * (p.a * p.v_of(y[0]) + p.b * y[1])).exp()).with_partials(move |y, k| {
            let e = (2.0 * (p.a * p.v_of(y[0]) + p.b * y[1])).exp();
            let d = match k {
                0 => 2.0 * p.a * p.dv(y[0]),
                1 => 2.0 * p.b,
                _ => 0.0,
            };
            DMatrix::identity(m, m) * (d * e)
        });
        let chart = LightlikeChart::new(m, Domain::slab(-0.5, 0.5, m, 1.0), h)?;
        let mut imm = LightlikeImmersion::new(self.ambient(m)?, chart, move |y| {
            let mut x = DVector::zeros(n);
            x[1] = p.v_of(y[0]);
            x.rows_mut(2, m).copy_from_slice(&y[1..]);
            x
        })?
        .with_jacobian(move |y| {
            let mut j = DMatrix::zeros(n, m + 1);
            j[(1, 0)] = p.dv(y[0]);
            for i in 0..m {
                j[(i + 2, i + 1)] = 1.0;
            }
            j
        });
        imm.step = step;
        Ok(imm)
    }
}

/// ψ(τ, x) = (t, (R + t)p(x)) with t = e^τ: the null hypersurface of points
/// at distance R from the unit sphere in the time slice x₀ = 0. K̄ = (t/(R + t))^m.
pub fn sphere_offset_cone(m: usize, radius: f64, step: f64) -> Result<LightlikeImmersion> {
    let h = MetricField::new(m + 1, m, move |y| {
        let r = radius + y[0].exp();
        DMatrix::identity(m, m) * (r * r * round_factor(&y[1..]))
    })
    .with_partials(move |y, k| {
        let t = y[0].exp();
        let r = radius + t;
        let v = if k == 0 { 2.0 * r * t * round_factor(&y[1..]) } else { r * r * round_factor_partial(&y[1..], k - 1) };
        DMatrix::identity(m, m) * v
    });
    let chart = LightlikeChart::new(m, Domain::slab(-0.5, 0.5, m, 0.8), h)?;
    let mut imm = LightlikeImmersion::new(LorentzChart::minkowski(m), chart, move |y| {
        let t = y[0].exp();
        let mut v = DVector::zeros(m + 2);
        v[0] = t;
        v.rows_mut(1, m + 1).copy_from(&(stereo_to_sphere(&y[1..]) * (radius + t)));
        v
    })?
    .with_jacobian(move |y| {
        let t = y[0].exp();
        let p = stereo_to_sphere(&y[1..]);
        let dp = stereo_jacobian(&y[1..]);
        let mut j = DMatrix::zeros(m + 2, m + 1);
        j[(0, 0)] = t;
        for r in 0..=m {
            j[(r + 1, 0)] = t * p[r];
            for c in 0..m {
                j[(r + 1, c + 1)] = (radius + t) * dp[(r, c)];
            }
        }
        j
    });
    imm.step = step;
    Ok(imm)
}
