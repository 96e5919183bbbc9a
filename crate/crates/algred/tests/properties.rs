use std::collections::BTreeMap;

use algred::algebroid::SectionField;
use algred::fixtures;
use algred::liegroup::{expm, GroupElement, LieAlgebra};
use algred::linalg::Mat;
use algred::sampling::Sampler;
use algred::symexpr::{parse, Expr, Role, VarEnv};
use proptest::prelude::*;

fn vars() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

fn poly(seed: u64, degree: u32) -> Expr {
    Sampler::new(seed).polynomial(&vars(), degree)
}

fn at(p: &[f64; 3]) -> BTreeMap<String, f64> {
    vars().into_iter().zip(p.iter().copied()).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_identities_are_exact(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (poly(s1, 2), poly(s2, 2), poly(s3, 1));
        prop_assert!((&a * &(&b + &c) - (&a * &b + &a * &c)).is_identically_zero());
        prop_assert!((&(&a + &b) - &b - &a).is_identically_zero());
        prop_assert!((&a * &b - &b * &a).is_identically_zero());
    }

    #[test]
    fn quotients_cancel(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = poly(s1, 2);
        let b = poly(s2, 1) + Expr::var("x") * Expr::var("x") + Expr::int(7);
        prop_assert!((&(&a / &b) * &b - &a).is_identically_zero());
    }

    #[test]
    fn evaluation_is_a_ring_map(s1 in any::<u64>(), s2 in any::<u64>(), p in point()) {
        let (a, b) = (poly(s1, 3), poly(s2, 2));
        let pt = at(&p);
        let (va, vb) = (a.eval(&pt).unwrap(), b.eval(&pt).unwrap());
        prop_assert!(close((&a * &b).eval(&pt).unwrap(), va * vb));
        prop_assert!(close((&a - &b).eval(&pt).unwrap(), va - vb));
        let compiled = a.compile(&vars()).unwrap();
        prop_assert!(close(compiled.eval(&p).unwrap(), va));
    }

    #[test]
    fn substitution_commutes_with_evaluation(s1 in any::<u64>(), s2 in any::<u64>(), p in point()) {
        let a = poly(s1, 2);
        let inner = poly(s2, 1);
        let map: BTreeMap<String, Expr> = [("y".to_string(), inner.clone())].into_iter().collect();
        let mut pt = at(&p);
        let lhs = a.subst(&map).eval(&pt).unwrap();
        pt.insert("y".into(), inner.eval(&pt).unwrap());
        prop_assert!(close(lhs, a.eval(&pt).unwrap()));
    }

    #[test]
    fn printed_expressions_parse_back(s1 in any::<u64>(), s2 in any::<u64>()) {
        let e = poly(s1, 3) / (poly(s2, 1) + Expr::int(9) + Expr::var("z") * Expr::var("z"));
        let env = VarEnv::with(&vars(), Role::Base).unwrap();
        let back = parse(&e.to_string(), &env).unwrap();
        prop_assert!((back - e).is_identically_zero());
    }

    #[test]
    fn adjoint_is_a_homomorphism_preserving_brackets(
        a in prop::collection::vec(-1.5..1.5f64, 3),
        b in prop::collection::vec(-1.5..1.5f64, 3),
        xi in prop::collection::vec(-2.0..2.0f64, 3),
        eta in prop::collection::vec(-2.0..2.0f64, 3),
        mu in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let alg = LieAlgebra::so3();
        let (g, h) = (GroupElement::exp(&alg, &a, 1.0), GroupElement::exp(&alg, &b, 0.7));
        let gh = g.mul(&h);
        prop_assert!(algred::linalg::max_abs(&(gh.ad() - g.ad() * h.ad())) < 1e-12);
        let lhs = g.adjoint(&alg.bracket(&xi, &eta));
        let rhs = alg.bracket(&g.adjoint(&xi), &g.adjoint(&eta));
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() < 1e-12);
        }
        // ⟨Coad_g μ, Ad_g ξ⟩ = ⟨μ, ξ⟩.
        let paired: f64 = g.coad(&mu).iter().zip(g.adjoint(&xi)).map(|(m, x)| m * x).sum();
        let plain: f64 = mu.iter().zip(&xi).map(|(m, x)| m * x).sum();
        prop_assert!((paired - plain).abs() < 1e-12);
        let back = g.inverse().adjoint(&g.adjoint(&xi));
        for (u, v) in back.iter().zip(&xi) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_exponential_inverts_and_matches_series(entries in prop::collection::vec(-1.0..1.0f64, 9)) {
        let a = Mat::from_row_slice(3, 3, &entries);
        let e = expm(&a);
        prop_assert!(algred::linalg::max_abs(&(&e * expm(&(-&a)) - Mat::identity(3, 3))) < 1e-12);
        let mut series = Mat::identity(3, 3);
        let mut term = Mat::identity(3, 3);
        for k in 1..30 {
            term = &term * &a / k as f64;
            series += &term;
        }
        prop_assert!(algred::linalg::max_abs(&(e - series)) < 1e-12);
    }

    #[test]
    fn algebroid_bracket_is_antisymmetric_and_leibniz(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let model = fixtures::load("fix-act").unwrap().model.validated().unwrap();
        let coords = model.coords().to_vec();
        let section = |seed: u64| -> SectionField {
            let mut s = Sampler::new(seed);
            model.section((0..model.rank()).map(|_| s.polynomial(&coords, 1)).collect()).unwrap()
        };
        let (x, y) = (section(s1), section(s2));
        let f = Sampler::new(s3).polynomial(&coords, 2);
        let sum = model.bracket(&x, &y).unwrap().add(&model.bracket(&y, &x).unwrap());
        prop_assert!(sum.is_zero());
        let lhs = model.bracket(&x, &y.scale(&f)).unwrap();
        let rhs = model.bracket(&x, &y).unwrap().scale(&f).add(&y.scale(&model.anchor_apply(&x, &f).unwrap()));
        prop_assert!(lhs.sub(&rhs).is_zero());
    }
}

proptest! {
    // Quotient-rule cancellation runs full multivariate gcds; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn derivatives_obey_product_and_quotient_rules(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (poly(s1, 3), poly(s2, 2) + Expr::int(5) + Expr::var("y") * Expr::var("y"));
        let prod = (&a * &b).diff("x") - (a.diff("x") * &b + &a * b.diff("x"));
        prop_assert!(prod.is_identically_zero());
        let quot = (&a / &b).diff("z") - (a.diff("z") * &b - &a * b.diff("z")) / (&b * &b);
        prop_assert!(quot.is_identically_zero());
        prop_assert!((a.diff("x").diff("y") - a.diff("y").diff("x")).is_identically_zero());
    }
}
