use llcartan_core::lie::{
    ad_full, ad_h_grading, ad_h_minus, ad_quotient, bracket, exp, maurer_cartan, structure_residual, AlgebraElement, GroupElement, HElement, QuotientVector,
    TwoParameterFamily,
};
use llcartan_core::rng::seeded;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

fn dist(a: &AlgebraElement, b: &AlgebraElement) -> f64 {
    (a.to_matrix() - b.to_matrix()).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_the_matrix_commutator(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let x = AlgebraElement::random(m, 1.0, &mut rng);
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let b = bracket(&x, &y).unwrap();
        let oracle = commutator(&x.to_matrix(), &y.to_matrix());
        prop_assert!((b.to_matrix() - oracle).amax() < 1e-12);
        prop_assert!(dist(&b, &bracket(&y, &x).unwrap().scale(-1.0)) < 1e-12);
    }

    #[test]
    fn jacobi_identity(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let [x, y, z] = [0; 3].map(|_| AlgebraElement::random(m, 1.0, &mut rng));
        let cyc = bracket(&x, &bracket(&y, &z).unwrap()).unwrap()
            .add(&bracket(&y, &bracket(&z, &x).unwrap()).unwrap())
            .add(&bracket(&z, &bracket(&x, &y).unwrap()).unwrap());
        prop_assert!(cyc.max_abs() < 1e-11);
    }

    #[test]
    fn grading_element_acts_by_degree(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let g = y.grade();
        let e = AlgebraElement::grading(m);
        let minus = AlgebraElement { x: g.minus.clone(), ..AlgebraElement::zero(m) };
        let plus = AlgebraElement { zrow: g.plus.clone(), ..AlgebraElement::zero(m) };
        let zero = AlgebraElement { a: g.zero_a, skew: g.zero_skew.clone(), ..AlgebraElement::zero(m) };
        prop_assert!(dist(&bracket(&e, &minus).unwrap(), &minus.scale(-1.0)) < 1e-12);
        prop_assert!(dist(&bracket(&e, &plus).unwrap(), &plus) < 1e-12);
        prop_assert!(bracket(&e, &zero).unwrap().max_abs() < 1e-12);
        prop_assert!(dist(&g.materialize(), &y) == 0.0);
    }

    #[test]
    fn coordinates_roundtrip(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let y = AlgebraElement::random(m, 2.0, &mut rng);
        let c = y.to_coords();
        prop_assert_eq!(c.len(), AlgebraElement::dimension(m));
        prop_assert_eq!(AlgebraElement::from_coords(m, &c).unwrap(), y);
    }

    #[test]
    fn exponential_lands_in_the_group(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let y = AlgebraElement::random(m, 0.5, &mut rng);
        let sigma = exp(&y);
        prop_assert!(GroupElement::from_matrix(sigma.matrix().clone()).is_ok());
        let back = exp(&y.scale(-1.0));
        prop_assert!((sigma.mul(&back).matrix() - DMatrix::identity(m + 2, m + 2)).amax() < 1e-12);
    }

    #[test]
    fn adjoint_is_a_lie_algebra_morphism(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sigma = GroupElement::random(m, 0.5, &mut rng);
        let x = AlgebraElement::random(m, 1.0, &mut rng);
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let lhs = ad_full(&sigma, &bracket(&x, &y).unwrap()).unwrap();
        let rhs = bracket(&ad_full(&sigma, &x).unwrap(), &ad_full(&sigma, &y).unwrap()).unwrap();
        let scale = 1.0 + sigma.matrix().amax().powi(4);
        prop_assert!(dist(&lhs, &rhs) < 1e-11 * scale);
    }

    #[test]
    fn quotient_action_matches_conjugation(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sigma = HElement::random(m, &mut rng);
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let by_conjugation = ad_full(&sigma.to_group(), &y).unwrap().quotient();
        let closed = ad_quotient(&sigma, &y.quotient());
        prop_assert!((by_conjugation.to_vector() - closed.to_vector()).amax() < 1e-12);
        prop_assert!((sigma.quotient_matrix() * y.quotient().to_vector() - closed.to_vector()).amax() < 1e-12);
    }

    #[test]
    fn h_composition_matches_matrix_product(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = HElement::random(m, &mut rng);
        let b = HElement::random(m, &mut rng);
        prop_assert!((a.compose(&b).to_matrix() - a.to_matrix() * b.to_matrix()).amax() < 1e-12);
        prop_assert!(a.compose(&a.inverse()).is_identity(1e-12));
        prop_assert!(HElement::from_group(&a.to_group()).is_ok());
    }

    #[test]
    fn closed_form_adjoint_of_generators(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sigma = HElement::random(m, &mut rng);
        let g = sigma.to_group();
        prop_assert!(dist(&ad_h_grading(&sigma), &ad_full(&g, &AlgebraElement::grading(m)).unwrap()) < 1e-12);
        for i in 0..m {
            let oracle = ad_full(&g, &AlgebraElement::e_minus(m, i)).unwrap();
            prop_assert!(dist(&ad_h_minus(&sigma, i), &oracle) < 1e-12);
        }
    }

    #[test]
    fn maurer_cartan_form_is_left_invariant(m in 2usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let sigma = GroupElement::random(m, 0.5, &mut rng);
        let tau = GroupElement::random(m, 0.5, &mut rng);
        let y = AlgebraElement::random(m, 1.0, &mut rng);
        let xi = sigma.matrix() * y.to_matrix();
        let at_sigma = maurer_cartan(&sigma, &xi).unwrap();
        let moved = maurer_cartan(&tau.mul(&sigma), &(tau.matrix() * &xi)).unwrap();
        prop_assert!(dist(&at_sigma, &y) < 1e-10 * (1.0 + sigma.matrix().amax().powi(2)));
        prop_assert!(dist(&moved, &at_sigma) < 1e-9 * (1.0 + (tau.matrix().amax() * sigma.matrix().amax()).powi(2)));
    }

    #[test]
    fn structure_equation_residual_shrinks_with_the_step(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let fam = TwoParameterFamily::random(3, 1.0, &mut rng);
        let coarse = structure_residual(&fam, 0.3, -0.2, 1e-2).unwrap();
        let fine = structure_residual(&fam, 0.3, -0.2, 1e-3).unwrap();
        prop_assert!(fine < 1e-4);
        prop_assert!(fine < coarse);
    }
}

#[test]
fn quotient_metric_ignores_the_radial_part() {
    let v = QuotientVector::new(3.0, nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let r = QuotientVector::radial(2);
    assert_eq!(v.q(&r), 0.0);
    assert_eq!(v.q(&v), 5.0);
}
