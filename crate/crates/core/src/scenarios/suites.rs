//! Check suites, one function per scenario.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::builders::{cone_action_chart, flat_lightlike_chart, model_cone as cone, null_hyperplane, sphere_offset_cone, Recurrent};
use super::{Check, Params};
use crate::ambient::{
    ambient_pipeline, build_ambient, build_ambient_c, embed_rho_zero, embed_rho_zero_scaled, fg_cone_metric as fg_cone, lc_closed_form,
    ricci_rho_rho_closed_form, rs_closed_form, warped_criterion, AmbientChart, LcItem, MetricFamily, PipelineReport, RsItem, Sigma, DEFAULT_EPSILON,
};
use crate::cartan::{
    cartan_rank_test, connection_rank, expansion, extract_z_omega, flatness_diagnostics, h_omega_matrix, horizontal_preservation_check, kossowski_curvature,
    lift_frame, nabla_z, omega_fundamental, omega_quotient_closed_form, random_frame, soldering_eval, AdmissibleFrame, AffineChartMap, FlatModelConnection,
    FnChartMap, LightlikeImmersion, RANK_TOL, SAMPLE_MARGIN,
};
use crate::error::{Error, Result};
use crate::lie::{ad_full, ad_h_grading, ad_h_minus, ad_quotient, bracket, exp, structure_residual, AlgebraElement, Graded, HElement, TwoParameterFamily};
use crate::lightlike::{a_z, generic_check, LightlikeChart, GENERIC_THRESHOLD};
use crate::lorentz::{christoffels, ricci_tensor, riemann_of, riemann_tensor};
use crate::metric::MetricField;
use crate::rng::{stream, uniform_vec};

/// Index offset for auxiliary draws, so they never share a stream with the
/// frame of the same sample.
const AUX: u64 = 1 << 32;

fn unit(n: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    e
}

fn frames(chart: &LightlikeChart, seed: u64, n: usize) -> Result<Vec<AdmissibleFrame>> {
    (0..n).map(|i| random_frame(chart, &mut stream(seed, i as u64))).collect()
}

fn spatial_basis(m: usize) -> Vec<DVector<f64>> {
    (1..=m).map(|i| unit(m + 1, i)).collect()
}

// ---------------------------------------------------------------- algebra

fn pieces(y: &AlgebraElement) -> [(i32, AlgebraElement); 3] {
    let m = y.m();
    let g = y.grade();
    let zero = Graded { minus: DVector::zeros(m), zero_a: g.zero_a, zero_skew: g.zero_skew.clone(), plus: DVector::zeros(m) };
    [(-1, AlgebraElement::from_minus(g.minus)), (0, zero.materialize()), (1, AlgebraElement::from_plus(g.plus))]
}

/// Largest component of y outside degree d.
fn off_degree(y: &AlgebraElement, d: i32) -> f64 {
    let g = y.grade();
    let mut r: f64 = 0.0;
    if d != -1 {
        r = r.max(g.minus.amax());
    }
    if d != 0 {
        r = r.max(g.zero_a.abs()).max(g.zero_skew.amax());
    }
    if d != 1 {
        r = r.max(g.plus.amax());
    }
    r
}

pub fn lie_algebra(p: &Params) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for m in 2..=4usize {
        let (mut grading, mut quotient, mut closed): (f64, f64, f64) = (0.0, 0.0, 0.0);
        let e = AlgebraElement::grading(m);
        for i in 0..p.samples() {
            let mut rng = stream(p.seed(), ((m as u64) << 40) + i as u64);
            let y1 = AlgebraElement::random(m, 1.0, &mut rng);
            let y2 = AlgebraElement::random(m, 1.0, &mut rng);
            for (d1, a) in &pieces(&y1) {
                for (d2, b) in &pieces(&y2) {
                    grading = grading.max(off_degree(&bracket(a, b)?, d1 + d2));
                }
                let eigen = bracket(&e, a)?.add(&a.scale(-(*d1 as f64)));
                grading = grading.max(eigen.max_abs());
            }
            let sigma = HElement::random(m, &mut rng);
            let g = sigma.to_group();
            let oracle = ad_full(&g, &y1)?.quotient().to_vector();
            quotient = quotient.max((ad_quotient(&sigma, &y1.quotient()).to_vector() - oracle).amax());
            closed = closed.max((ad_h_grading(&sigma).to_coords() - ad_full(&g, &e)?.to_coords()).amax());
            for k in 0..m {
                let ek = AlgebraElement::e_minus(m, k);
                closed = closed.max((ad_h_minus(&sigma, k).to_coords() - ad_full(&g, &ek)?.to_coords()).amax());
            }
        }
        out.push(Check::at_most(format!("grading-closure-m{m}"), "[g_i, g_j] ⊂ g_{i+j} and ad E = j on g_j", grading, 1e-12));
        out.push(Check::at_most(format!("ad-quotient-m{m}"), "Ad of H on g/h against matrix conjugation", quotient, 1e-11));
        out.push(Check::at_most(format!("ad-closed-forms-m{m}"), "closed forms of Ad(σ)E and Ad(σ)E_i", closed, 1e-11));
    }
    Ok(out)
}

pub fn maurer_cartan(p: &Params) -> Result<Vec<Check>> {
    let m = p.usize("m");
    let h = p.fd_step();
    let mut worst: f64 = 0.0;
    let mut order: f64 = 0.0;
    for i in 0..p.samples() {
        let mut rng = stream(p.seed(), i as u64);
        let fam = TwoParameterFamily::random(m, 1.0, &mut rng);
        let (s, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let coarse = structure_residual(&fam, s, t, h)?;
        let fine = structure_residual(&fam, s, t, h / 2.0)?;
        worst = worst.max(coarse);
        order = order.max((coarse / fine - 4.0).abs());
    }
    Ok(vec![
        Check::at_most("structure-equation", "dω + ½[ω, ω] = 0 for the Maurer–Cartan form", worst, 1e-5),
        Check::at_most("second-order-convergence", "residual ratio under step halving is 4 (|ratio − 4|)", order, 0.5),
    ])
}

// ---------------------------------------------------------------- model cone

/// σ·ψ on the cone in chart coordinates; points leaving the chart map to infinity.
fn cone_automorphism(m: usize, mu: f64, seed: u64) -> FnChartMap {
    let mut rng = stream(seed, AUX << 8);
    let sigma = exp(&AlgebraElement::random(m, 0.15, &mut rng)).to_canonical();
    FnChartMap(Arc::new(move |y| cone_action_chart(&sigma, mu, y).unwrap_or_else(|| vec![f64::INFINITY; m + 1])))
}

pub fn model_cone(p: &Params) -> Result<Vec<Check>> {
    let (m, mu, n, seed) = (p.usize("m"), p.get("mu"), p.samples(), p.seed());
    let imm = cone(m, mu, p.fd_step())?;
    let pullback = imm.validate(n, seed)?.pullback_residual;
    let mut lam: f64 = 0.0;
    let mut nz: f64 = 0.0;
    let mut min_rel = f64::INFINITY;
    let mut inconsistent = 0usize;
    let (mut hdev, mut zdev, mut fund, mut equiv, mut sold, mut quot): (f64, f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let zero = AlgebraElement::zero(m);
    for (i, b) in frames(&imm.chart, seed, n)?.iter().enumerate() {
        let mut rng = stream(seed, AUX + i as u64);
        lam = lam.max((expansion(&imm, &b.y)? - mu).abs());
        nz = nz.max((nabla_z(&imm, &b.y)?.matrix - DMatrix::identity(m + 1, m + 1) * mu).amax());
        let test = cartan_rank_test(&imm, b)?;
        min_rel = min_rel.min(test.omega.relative_sv);
        if !test.consistent() {
            inconsistent += 1;
        }
        if test.omega.invertible {
            hdev = hdev.max((h_omega_matrix(&imm, b)? - imm.chart.full_metric(&b.y) * (mu * mu)).amax());
            zdev = zdev.max((extract_z_omega(&imm, b)? - unit(m + 1, 0) / mu).amax());
        }
        let y = AlgebraElement::random_h(m, 1.0, &mut rng);
        fund = fund.max((omega_fundamental(&imm, b, &y)?.to_coords() - y.to_coords()).amax());
        let v = uniform_vec(m + 1, -1.0, 1.0, &mut rng);
        let sigma = HElement::random(m, &mut rng);
        equiv = equiv.max(crate::cartan::equivariance_residual(&imm, b, &v, &sigma)?);
        let num = soldering_eval(&imm, b, &v, &zero)?.to_vector();
        sold = sold.max((&num - b.coefficients(&v)? * mu).amax());
        quot = quot.max((omega_quotient_closed_form(&imm, b, &v)?.to_vector() - num).amax());
    }
    let flat = flatness_diagnostics(&imm, n, seed, 1e-6)?;
    let aut = horizontal_preservation_check(&imm, &cone_automorphism(m, mu, seed), n.min(10), seed)?;
    Ok(vec![
        Check::at_most("immersion-pullback", "ψ*g = h on the cone", pullback, 1e-8),
        Check::at_most("expansion", "model cone: λ = μ", lam, 1e-8),
        Check::at_most("nabla-z-identity", "model cone: ∇̄Z = μ·Id", nz, 1e-8),
        Check::at_least("cartan-rank", "ω is a Cartan connection (smallest relative singular value)", min_rel, RANK_TOL),
        Check::at_most("rank-verdict-consistency", "ω invertible iff ∇̄Z invertible (disagreeing frames)", inconsistent as f64, 0.0),
        Check::at_most("h-omega", "h^ω = λ²h on the cone", hdev, 1e-7),
        Check::at_most("z-omega", "Z^ω = Z/λ on the cone", zdev, 1e-7),
        Check::at_most("fundamental-fields", "ω reproduces fundamental vector fields", fund, 1e-8),
        Check::at_most("equivariance", "r_σ*ω = Ad(σ⁻¹)ω", equiv, 1e-7),
        Check::at_most("soldering", "proj∘ω(b) = b⁻¹∘∇̄Z", sold, 1e-8),
        Check::at_most("quotient-closed-form", "g/h part of ω from the ambient data", quot, 1e-7),
        Check::at_most("curvature-vanishes", "model cone: K^ω = 0", flat.model_flat_residual, 1e-6),
        Check::at_most("flat-h-lambda", "flat case: h^ω = λ²h", flat.h_lambda_residual.unwrap_or(f64::NAN), 1e-7),
        Check::at_most("mobius-automorphism", "ambient isometries preserve ω-horizontal fields", aut.max_residual, 1e-6),
    ])
}

// ---------------------------------------------------------------- null hyperplane

pub fn flat_null_hyperplane(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed) = (p.usize("m"), p.samples(), p.seed());
    let imm = null_hyperplane(m, p.fd_step())?;
    let pullback = imm.validate(n, seed)?.pullback_residual;
    let origin = vec![0.0; m + 1];
    let eta0 = lift_frame(&imm, &AdmissibleFrame::standard(&imm.chart, &origin)?)?.l_minus();
    let mut max_rel: f64 = 0.0;
    let mut inconsistent = 0usize;
    let mut max_det: f64 = 0.0;
    let mut eta: f64 = 0.0;
    let mut kos: f64 = 0.0;
    for b in frames(&imm.chart, seed, n)? {
        let test = cartan_rank_test(&imm, &b)?;
        max_rel = max_rel.max(test.omega.relative_sv);
        if !test.consistent() {
            inconsistent += 1;
        }
        max_det = max_det.max(imm.chart.spatial_ds(&b.y).determinant().abs());
        let std = AdmissibleFrame::standard(&imm.chart, &b.y)?;
        eta = eta.max((lift_frame(&imm, &std)?.l_minus() - &eta0).amax());
        kos = kos.max(kossowski_curvature(&imm, &b.y, &spatial_basis(m))?.abs());
    }

    let mut conn = FlatModelConnection::new(flat_lightlike_chart(m)?);
    conn.step = p.fd_step();
    let k = n.min(10);
    let mut model_rel = f64::INFINITY;
    let (mut hdev, mut zdev): (f64, f64) = (0.0, 0.0);
    for b in frames(&conn.chart, seed, k)? {
        model_rel = model_rel.min(connection_rank(&conn, &b)?.relative_sv);
        hdev = hdev.max((h_omega_matrix(&conn, &b)? - conn.chart.full_metric(&b.y)).amax());
        zdev = zdev.max((extract_z_omega(&conn, &b)? - unit(m + 1, 0)).amax());
    }
    let translation = AffineChartMap { linear: DMatrix::identity(m + 1, m + 1), offset: unit(m + 1, 0) * 0.3 };
    let mut shear = DMatrix::identity(m + 1, m + 1);
    shear[(0, 1)] = 1.0;
    let shear = AffineChartMap { linear: shear, offset: DVector::zeros(m + 1) };
    let tr = horizontal_preservation_check(&conn, &translation, k, seed)?;
    let sh = horizontal_preservation_check(&conn, &shear, k, seed)?;

    Ok(vec![
        Check::at_most("immersion-pullback", "ψ*g = h on the null hyperplane", pullback, 1e-10),
        Check::at_least("cartan-rank", "null hyperplane: rank test fails at every frame (largest relative singular value)", max_rel, RANK_TOL)
            .expecting_failure(),
        Check::at_most("rank-verdict-consistency", "ω invertible iff ∇̄Z invertible (disagreeing frames)", inconsistent as f64, 0.0),
        Check::at_least("generic", "null hyperplane: A_Z = 0 (largest |det ∂_s H|)", max_det, GENERIC_THRESHOLD).expecting_failure(),
        Check::at_most("eta-constant", "null hyperplane: η(b) is constant", eta, 1e-12),
        Check::at_most("kossowski-zero", "null hyperplane: K̄ = 0", kos, 1e-12),
        Check::at_least("model-rank", "flat model connection is Cartan", model_rel, RANK_TOL),
        Check::at_most("model-h-omega", "flat model connection: h^ω = h", hdev, 1e-9),
        Check::at_most("model-z-omega", "flat model connection: Z^ω = Z", zdev, 1e-9),
        Check::at_most("translation-isometry", "f₀ = x₀ + c preserves (h, Z)", tr.isometry_residual, 1e-6),
        Check::at_most("translation-horizontal", "f₀ = x₀ + c preserves ω-horizontal fields", tr.max_residual, 1e-7),
        Check::at_most("shear-isometry", "f₀ = x₀ + x₁ preserves (h, Z)", sh.isometry_residual, 1e-6),
        Check::at_least("shear-horizontal", "f₀ = x₀ + x₁ does not preserve ω-horizontal fields", sh.max_residual, 1e-2),
    ])
}

// ---------------------------------------------------------------- FG metrics

fn ambient_samples(chart: &AmbientChart, seed: u64, n: usize, offset: u64) -> Vec<Vec<f64>> {
    let dom = chart.domain();
    (0..n).map(|i| dom.sample_inset(0.01, &mut stream(seed, offset + i as u64))).collect()
}

fn max_ricci(chart: &AmbientChart, step: f64, points: &[Vec<f64>]) -> Result<f64> {
    let mut lor = chart.lorentz();
    lor.outer_step = step;
    points.iter().try_fold(0.0f64, |acc, q| Ok(acc.max(ricci_tensor(&lor, q)?.amax())))
}

fn max_expansion_deviation(imm: &LightlikeImmersion, fs: &[AdmissibleFrame], target: f64) -> Result<f64> {
    fs.iter().try_fold(0.0f64, |acc, b| Ok(acc.max((expansion(imm, &b.y)? - target).abs())))
}

pub fn fg_cone_metric(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed) = (p.usize("m"), p.samples(), p.seed());
    let fg = fg_cone(m)?;
    let chart = &fg.chart;
    let points = ambient_samples(chart, seed, n, 0);
    let s_idx = chart.s_index();
    let mut structure: f64 = 0.0;
    for q in &points {
        let g = chart.metric(q);
        let (rho, s) = (q[0], q[s_idx]);
        structure = structure.max((g[(s_idx, s_idx)] - 2.0 * rho).abs()).max((g[(s_idx, 0)] - s).abs()).max(g[(0, 0)].abs());
    }
    let ricci = max_ricci(chart, p.fd_step(), &points)?;
    let alpha = fg.alpha_pullback_residual(n, seed);
    let mut imm = embed_rho_zero(chart)?;
    imm.step = p.fd_step();
    let k = n.min(20);
    let lam = max_expansion_deviation(&imm, &frames(&imm.chart, seed, k)?, 1.0)?;
    let flat = flatness_diagnostics(&imm, k, seed, 1e-6)?;
    Ok(vec![
        Check::at_most("metric-structure", "g(∂_s,∂_s) = 2ρ, g(∂_s,∂_ρ) = s, g(∂_ρ,∂_ρ) = 0", structure, 1e-12),
        Check::at_most("ricci-flat", "FG cone metric is Ricci flat", ricci, 1e-5),
        Check::at_most("alpha-pullback", "α*⟨,⟩ equals the FG cone metric", alpha, 1e-7),
        Check::at_most("expansion", "ρ = 0 embedding has λ = 1", lam, 1e-8),
        Check::at_most("curvature-vanishes", "flat ambient: K^ω = 0", flat.model_flat_residual, 1e-6),
    ])
}

pub fn fg_scale_bundle(p: &Params) -> Result<Vec<Check>> {
    let (n, seed) = (p.samples(), p.seed());
    let chart = build_ambient_c(MetricFamily::sphere_product_cone(2, 2), p.get("c"), DEFAULT_EPSILON)?;
    let ricci = max_ricci(&chart, p.fd_step(), &ambient_samples(&chart, seed, n, 0))?;
    let mut imm = embed_rho_zero(&chart)?;
    imm.step = p.fd_step();
    let flat = flatness_diagnostics(&imm, n, seed, 1e-6)?;
    Ok(vec![
        Check::at_most("ricci-flat", "ambient metric of S² × S² is Ricci flat at c = 1/6", ricci, 1e-5),
        Check::at_most("scale-flat", "curvature criterion K^ω(E, ·) = 0 holds", flat.scale_residual, 1e-6),
        Check::at_most("model-flat", "curvature criterion K^ω = 0 fails on a non-flat base", flat.model_flat_residual, 1e-6).expecting_failure(),
        Check::at_most("h-lambda", "scale-flat case: h^ω = λ²h", flat.h_lambda_residual.unwrap_or(f64::NAN), 1e-5),
    ])
}

// ---------------------------------------------------------------- ambient closed forms

fn relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

pub fn ambient_closed_forms(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed) = (p.usize("m"), p.samples(), p.seed());
    let dim = m + 2;
    let (rho_dir, s_dir) = (unit(dim, 0), unit(dim, dim - 1));
    let lift = |v: &DVector<f64>| {
        let mut out = DVector::zeros(dim);
        out.rows_mut(1, m).copy_from(v);
        out
    };
    let families = [MetricFamily::cone(m), MetricFamily::warped_power(m, 1.5)];
    let sigmas = [Sigma::one(), Sigma::linear(1.0), Sigma::quadratic()];
    let (mut lc, mut rs, mut ric, mut frame, mut embed): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut combo = 0u64;
    for fam in &families {
        for sig in &sigmas {
            combo += 1;
            let chart = build_ambient(fam.clone(), sig.clone(), DEFAULT_EPSILON)?;
            let mut lor = chart.lorentz();
            lor.outer_step = p.fd_step();
            for (i, q) in ambient_samples(&chart, seed, n, combo << 32).iter().enumerate() {
                let mut rng = stream(seed, (combo << 32) + AUX / 2 + i as u64);
                let (v, w) = (uniform_vec(m, -1.0, 1.0, &mut rng), uniform_vec(m, -1.0, 1.0, &mut rng));
                let (lv, lw) = (lift(&v), lift(&w));
                let gam = christoffels(&lor, q)?;
                let lc_items = [
                    (LcItem::RhoRho, &rho_dir, &rho_dir),
                    (LcItem::SRho, &s_dir, &rho_dir),
                    (LcItem::VRho(v.clone()), &lv, &rho_dir),
                    (LcItem::SS, &s_dir, &s_dir),
                    (LcItem::VS(v.clone()), &lv, &s_dir),
                    (LcItem::VW(v.clone(), w.clone()), &lv, &lw),
                ];
                for (item, x, y) in &lc_items {
                    lc = lc.max(relative(&lc_closed_form(&chart, q, item)?, &gam.contract(x, y)));
                }
                let r = riemann_tensor(&lor, q)?;
                let rs_items = [
                    (RsItem::SRhoRho, &s_dir, &rho_dir, &rho_dir),
                    (RsItem::VRhoRho(v.clone()), &lv, &rho_dir, &rho_dir),
                    (RsItem::RhoSS, &rho_dir, &s_dir, &s_dir),
                    (RsItem::VSS(v.clone()), &lv, &s_dir, &s_dir),
                    (RsItem::VRhoS(v.clone()), &lv, &rho_dir, &s_dir),
                ];
                for (item, x, y, z) in &rs_items {
                    rs = rs.max(relative(&rs_closed_form(&chart, q, item)?, &r.apply(x, y, z)));
                }
                ric = ric.max((r.ricci()[(0, 0)] - ricci_rho_rho_closed_form(&chart, q[0])).abs());
                let (t, e) = chart.frame_fields(q);
                let g = chart.metric(q);
                let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
                frame = frame.max((ip(&t, &t) + 1.0).abs()).max((ip(&e, &e) - 1.0).abs()).max(ip(&t, &e).abs());
            }
            let imm = embed_rho_zero(&chart)?;
            embed = embed.max(imm.validate(n.min(20), seed)?.pullback_residual);
            embed = embed.max(max_expansion_deviation(&imm, &frames(&imm.chart, seed, n.min(20))?, 1.0)?);
        }
    }
    // σ = 1 + cρ: Ric(∂_ρ, ∂_ρ) = 0.
    let mut ric_c: f64 = 0.0;
    for c in [-0.5, 0.0, 0.5, 1.0] {
        let chart = build_ambient_c(MetricFamily::warped_power(m, 1.5), c, DEFAULT_EPSILON)?;
        let mut lor = chart.lorentz();
        lor.outer_step = p.fd_step();
        for q in ambient_samples(&chart, seed, n.min(25), 7 << 32) {
            ric_c = ric_c.max(ricci_tensor(&lor, &q)?[(0, 0)].abs());
        }
    }
    Ok(vec![
        Check::at_most("levi-civita-closed-forms", "ambient Levi-Civita closed forms against Christoffel symbols", lc, 1e-5),
        Check::at_most("curvature-closed-forms", "ambient curvature closed forms against the numerical Riemann tensor", rs, 1e-5),
        Check::at_most("ricci-rho-rho", "Ric(∂ρ, ∂ρ) + mσ″/σ = 0", ric, 1e-5),
        Check::at_most("ricci-rho-rho-linear", "σ = 1 + cρ: Ric(∂ρ, ∂ρ) = 0 for c ∈ {−½, 0, ½, 1}", ric_c, 1e-6),
        Check::at_most("frame-fields", "g(T,T) = −1, g(E,E) = 1, g(T,E) = 0", frame, 1e-10),
        Check::at_most("embedding", "ρ = 0 embedding: ψ*g = h and λ = 1", embed, 1e-8),
    ])
}

// ---------------------------------------------------------------- umbilical examples

struct UmbilicStats {
    lam: f64,
    umbilic: f64,
    rho: f64,
    a_z: f64,
    min_rel: f64,
    inconsistent: usize,
    h_ratio: f64,
    z: f64,
}

/// Measures ∇̄Z against expected λ(y) and ρ(y) on sampled frames.
fn umbilic_stats(imm: &LightlikeImmersion, fs: &[AdmissibleFrame], lambda: impl Fn(&[f64]) -> f64, rho: impl Fn(&[f64]) -> f64) -> Result<UmbilicStats> {
    let m = imm.m();
    let mut st = UmbilicStats { lam: 0.0, umbilic: 0.0, rho: 0.0, a_z: 0.0, min_rel: f64::INFINITY, inconsistent: 0, h_ratio: 0.0, z: 0.0 };
    for b in fs {
        let lam = expansion(imm, &b.y)?;
        st.lam = st.lam.max((lam - lambda(&b.y)).abs());
        let a = nabla_z(imm, &b.y)?.quotient_block();
        let mean = a.trace() / m as f64;
        st.umbilic = st.umbilic.max((&a - DMatrix::identity(m, m) * mean).amax());
        let r = rho(&b.y);
        st.rho = st.rho.max((mean - r).abs());
        st.a_z = st.a_z.max((&a - a_z(&imm.chart, &b.y)?).amax());
        let test = cartan_rank_test(imm, b)?;
        st.min_rel = st.min_rel.min(test.omega.relative_sv);
        if !test.consistent() {
            st.inconsistent += 1;
        }
        if !test.omega.invertible {
            continue;
        }
        let h = imm.chart.full_metric(&b.y);
        st.h_ratio = st.h_ratio.max((h_omega_matrix(imm, b)? - &h * (r * r)).amax() / h.amax());
        st.z = st.z.max((extract_z_omega(imm, b)? - unit(m + 1, 0) / lam).amax());
    }
    Ok(st)
}

fn umbilic_checks(st: &UmbilicStats, lambda_anchor: &str, rho_anchor: &str) -> Vec<Check> {
    vec![
        Check::at_most("expansion", lambda_anchor, st.lam, 1e-7),
        Check::at_most("umbilic", "B_Z/h̄ is a multiple of the identity at each point", st.umbilic, 1e-6),
        Check::at_most("umbilic-factor", rho_anchor, st.rho, 1e-7),
        Check::at_most("b-z-equals-a-z", "∇̄Z on TN/Rad equals A_Z = ½H⁻¹∂_τH", st.a_z, 1e-7),
        Check::at_least("cartan-rank", "ω is a Cartan connection (smallest relative singular value)", st.min_rel, RANK_TOL),
        Check::at_most("rank-verdict-consistency", "ω invertible iff ∇̄Z invertible (disagreeing frames)", st.inconsistent as f64, 0.0),
        Check::at_most("h-omega-ratio", "umbilical: h^ω = ρ²h", st.h_ratio, 1e-5),
        Check::at_most("z-omega", "umbilical: Z^ω = Z/λ", st.z, 1e-7),
    ]
}

pub fn warped_umbilical(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed, mu) = (p.usize("m"), p.samples(), p.seed(), p.get("mu"));
    let family = MetricFamily::warped_quadratic(m);
    let chart = build_ambient_c(family.clone(), p.get("c"), DEFAULT_EPSILON)?;
    let mut imm = embed_rho_zero_scaled(&chart, mu)?;
    imm.step = p.fd_step();
    let pullback = imm.validate(n, seed)?.pullback_residual;
    let rho = move |y: &[f64]| {
        let s = (mu * y[0]).exp();
        mu * s * (1.0 + 0.5 * s) / (s + 0.25 * s * s)
    };
    let st = umbilic_stats(&imm, &frames(&imm.chart, seed, n)?, |_| mu, rho)?;
    let warped = warped_criterion(&family, n.max(2), seed)?;
    let generic = generic_check(&imm.chart, n, seed);
    let mut out = vec![Check::at_most("immersion-pullback", "ρ = 0 embedding: ψ*g = h", pullback, 1e-9)];
    out.extend(umbilic_checks(&st, "Z = μs∂_s gives λ = μ", "warped family: B_Z = μ(sε′/ε)h̄"));
    out.push(Check::at_most("warped", "g_s = ε(s)²g₁", warped.deviation, 1e-9));
    out.push(Check::at_least("generic", "ε′ ≠ 0 makes the family generic (smallest |det ∂_τH|)", generic.min_abs_det, GENERIC_THRESHOLD));
    Ok(out)
}

pub fn recurrent_conformal(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed) = (p.usize("m"), p.samples(), p.seed());
    let rec = Recurrent { a: p.get("a"), b: p.get("b"), c: p.get("c"), kappa: p.get("kappa") };
    let imm = rec.immersion(m, p.fd_step())?;
    let pullback = imm.validate(n, seed)?.pullback_residual;
    let st = umbilic_stats(&imm, &frames(&imm.chart, seed, n)?, |y| rec.expansion(y[0]), |y| rec.umbilic_factor(y[0]))?;
    let mut out = vec![Check::at_most("immersion-pullback", "ψ*g = h on u = 0", pullback, 1e-9)];
    out.extend(umbilic_checks(&st, "λ = κ + 2a·e^{κτ}", "B_Z = a·e^{κτ}h̄"));
    Ok(out)
}

// ---------------------------------------------------------------- Kossowski

pub fn kossowski_surface(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed, radius) = (p.usize("m"), p.samples(), p.seed(), p.get("radius"));
    let imm = sphere_offset_cone(m, radius, p.fd_step())?;
    let pullback = imm.validate(n, seed)?.pullback_residual;
    let cone_imm = sphere_offset_cone(m, 0.0, p.fd_step())?;
    let plane = null_hyperplane(m, p.fd_step())?;
    let basis = spatial_basis(m);
    let (mut closed, mut independence, mut cone_dev, mut plane_dev): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut min_k = f64::INFINITY;
    for i in 0..n {
        let mut rng = stream(seed, i as u64);
        let y = imm.chart.domain.sample_inset(SAMPLE_MARGIN, &mut rng);
        let t = y[0].exp();
        let k = kossowski_curvature(&imm, &y, &basis)?;
        min_k = min_k.min(k.abs());
        closed = closed.max((k - (t / (radius + t)).powi(m as i32)).abs());
        // Another complement: mix the spatial vectors and add multiples of Z.
        let mix = DMatrix::identity(m, m) + DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.3..0.3));
        let other: Vec<DVector<f64>> = (0..m)
            .map(|r| {
                let mut v = unit(m + 1, 0) * rng.gen_range(-1.0..1.0);
                for c in 0..m {
                    v[c + 1] += mix[(r, c)];
                }
                v
            })
            .collect();
        independence = independence.max((kossowski_curvature(&imm, &y, &other)? - k).abs());
        cone_dev = cone_dev.max((kossowski_curvature(&cone_imm, &y, &basis)? - 1.0).abs());
        let yp = plane.chart.domain.sample_inset(SAMPLE_MARGIN, &mut rng);
        plane_dev = plane_dev.max(kossowski_curvature(&plane, &yp, &basis)?.abs());
    }
    let generic_ok = generic_check(&imm.chart, n, seed).generic == (min_k > GENERIC_THRESHOLD);
    let plane_ok = !generic_check(&plane.chart, n, seed).generic;
    let disagreements = (!generic_ok) as usize + (!plane_ok) as usize;
    Ok(vec![
        Check::at_most("immersion-pullback", "ψ*g = h on the offset cone", pullback, 1e-9),
        Check::at_most("kossowski-closed-form", "offset cone: K̄ = (t/(R + t))^m", closed, 1e-8),
        Check::at_most("kossowski-complement-independent", "K̄ does not depend on the complement of Rad", independence, 1e-8),
        Check::at_most("kossowski-cone", "light cone: K̄ = 1", cone_dev, 1e-8),
        Check::at_most("kossowski-hyperplane", "null hyperplane: K̄ = 0", plane_dev, 1e-12),
        Check::at_most("generic-iff-nonzero", "generic iff K̄ ≠ 0 (disagreeing surfaces)", disagreements as f64, 0.0),
    ])
}

// ---------------------------------------------------------------- ambient pipeline

fn pipeline_checks(r: &PipelineReport) -> Vec<Check> {
    vec![
        Check::at_most("cartan-rank", "ω^c is a Cartan connection (failing frames)", r.rank_failures as f64, 0.0),
        Check::at_most("rank-verdict-consistency", "ω invertible iff ∇̄Z invertible (disagreeing frames)", r.inconsistent_verdicts as f64, 0.0),
        Check::at_most("expansion", "ρ = 0 embedding has λ = 1", r.expansion_deviation, 1e-8),
        Check::at_most("rescaled-h", "h^c rescaled by [∇̄Z]⁻¹ equals h", r.rescaled_h_deviation, 1e-5),
        Check::at_most("z-recovered", "Z^c = Z", r.z_deviation, 1e-7),
    ]
}

pub fn ricci_flow_sphere(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed) = (p.usize("m"), p.samples(), p.seed());
    let family = MetricFamily::ricci_flow(m);
    let chart = family.to_lightlike_chart(1.0)?;
    let k = 2.0 * (m as f64 - 1.0);
    let (mut closed, mut ricci): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let y = chart.domain.sample_inset(SAMPLE_MARGIN, &mut stream(seed, i as u64));
        let t = y[0];
        let a = a_z(&chart, &y)?;
        closed = closed.max((&a + DMatrix::identity(m, m) * ((m as f64 - 1.0) / (1.0 - k * t))).amax());
        let s = t.exp();
        let (f1, f2) = (family.clone(), family.clone());
        let slice = MetricField::new(m, m, move |x| f1.gs(s, x)).with_partials(move |x, j| f2.dx(s, x, j));
        let ric = riemann_of(&slice, &y[1..], p.fd_step())?.ricci();
        let g_inv = chart.spatial(&y).try_inverse().ok_or(Error::Singular("g(t)"))?;
        ricci = ricci.max((&a + g_inv * ric).amax());
    }
    let generic = generic_check(&chart, n, seed);
    let report = ambient_pipeline(family, p.get("c"), DEFAULT_EPSILON, n, seed)?;
    let mut out = vec![
        Check::at_most("a-z-closed-form", "shrinking sphere: A_Z = −(m−1)/(1 − 2(m−1)t)", closed, 1e-8),
        Check::at_most("a-z-ricci", "Ricci flow: A_Z = −Ric", ricci, 1e-6),
        Check::at_least("generic", "Ricci flow of the round sphere is generic (smallest |det ∂_tH|)", generic.min_abs_det, GENERIC_THRESHOLD),
    ];
    out.extend(pipeline_checks(&report));
    Ok(out)
}

pub fn ambient_from_chart(p: &Params) -> Result<Vec<Check>> {
    let (m, n, seed, c) = (p.usize("m"), p.samples(), p.seed(), p.get("c"));
    let code = p.usize("family");
    let family = match code {
        0 => MetricFamily::cone(m),
        1 => MetricFamily::warped_power(m, 1.5),
        _ => MetricFamily::warped_quadratic(m),
    };
    let warped = warped_criterion(&family, n.max(2), seed)?;
    let report = ambient_pipeline(family, c, DEFAULT_EPSILON, n, seed)?;
    let static_report = ambient_pipeline(MetricFamily::static_sphere(m), c, DEFAULT_EPSILON, n, seed)?;
    let mut out = pipeline_checks(&report);
    if code == 0 {
        out.push(Check::at_most("h-unchanged", "cone: [∇̄Z] is an isometry, h^c = h", report.h_deviation, 1e-5));
    }
    out.push(Check::at_most("warped", "g_s = ε(s)²g₁", warped.deviation, 1e-9));
    out.push(
        Check::at_least("static-rank", "s-independent family: rank test fails at every frame (passing frames)", static_report.rank_passes as f64, 1.0)
            .expecting_failure(),
    );
    out.push(Check::at_most(
        "static-verdict-consistency",
        "ω invertible iff ∇̄Z invertible on the static family (disagreeing frames)",
        static_report.inconsistent_verdicts as f64,
        0.0,
    ));
    Ok(out)
}
