use carnot::calculus::{subgradient, sublaplacian, FnField};
use carnot::frames::left_frame;
use carnot::group::{compose_into, dilate_in_place, inverse_into, GroupDescriptor};
use carnot::lab::fit_constants;
use carnot::norms::NormKind;
use proptest::prelude::*;

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

fn step_and_points(k: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (3usize..=6).prop_flat_map(move |n| (Just(n), prop::collection::vec(point(n + 1), k)))
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn compose(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    compose_into(x, y, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composition_is_associative((_, p) in step_and_points(3)) {
        let a = compose(&compose(&p[0], &p[1]), &p[2]);
        let b = compose(&p[0], &compose(&p[1], &p[2]));
        prop_assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn inverse_is_two_sided((_, p) in step_and_points(1)) {
        let mut inv = vec![0.0; p[0].len()];
        inverse_into(&p[0], &mut inv);
        let zero = vec![0.0; p[0].len()];
        prop_assert!(close(&compose(&p[0], &inv), &zero, 1e-12));
        prop_assert!(close(&compose(&inv, &p[0]), &zero, 1e-12));
    }

    #[test]
    fn dilations_are_automorphisms((_, p) in step_and_points(2), lambda in 0.1..4.0f64) {
        let mut lhs = compose(&p[0], &p[1]);
        dilate_in_place(lambda, &mut lhs);
        let (mut a, mut b) = (p[0].clone(), p[1].clone());
        dilate_in_place(lambda, &mut a);
        dilate_in_place(lambda, &mut b);
        prop_assert!(close(&lhs, &compose(&a, &b), 1e-12));
    }

    #[test]
    fn dilations_compose_multiplicatively((_, p) in step_and_points(1), s in 0.2..3.0f64, t in 0.2..3.0f64) {
        let mut a = p[0].clone();
        dilate_in_place(s, &mut a);
        dilate_in_place(t, &mut a);
        let mut b = p[0].clone();
        dilate_in_place(s * t, &mut b);
        prop_assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn norms_are_homogeneous((n, p) in step_and_points(1), lambda in 0.05..20.0f64) {
        let kinds = if n == 3 { vec![NormKind::Engel, NormKind::filiform(3).unwrap()] } else { vec![NormKind::filiform(n).unwrap()] };
        for kind in kinds {
            let mut y = p[0].clone();
            dilate_in_place(lambda, &mut y);
            let (a, b) = (kind.norm(&y), lambda * kind.norm(&p[0]));
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }

    #[test]
    fn norms_vanish_only_at_the_identity((n, p) in step_and_points(1)) {
        let kind = NormKind::filiform(n).unwrap();
        let v = kind.norm(&p[0]);
        prop_assert!(v > 0.0 || p[0].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn subgradient_obeys_leibniz((n, p) in step_and_points(1)) {
        let frame = left_frame(GroupDescriptor::new(n).unwrap());
        let f = |x: &[f64]| x[0] * x[2] + x[1].sin();
        let g = move |x: &[f64]| (0.3 * x[n]).cos() + x[1] * x[1];
        let fg = FnField::new(move |x: &[f64]| f(x) * g(x));
        let (ff, gf) = (FnField::new(f), FnField::new(g));
        let x = &p[0];
        let lhs = subgradient(&fg, &frame, x).unwrap().components;
        let (df, dg) = (subgradient(&ff, &frame, x).unwrap().components, subgradient(&gf, &frame, x).unwrap().components);
        for i in 0..2 {
            let rhs = f(x) * dg[i] + g(x) * df[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()), "{} {}", lhs[i], rhs);
        }
    }

    #[test]
    fn subgradient_obeys_the_chain_rule((n, p) in step_and_points(1)) {
        let frame = left_frame(GroupDescriptor::new(n).unwrap());
        let f = |x: &[f64]| 0.5 * x[0] + 0.2 * x[1] * x[2];
        let composed = FnField::new(move |x: &[f64]| f(x).exp());
        let x = &p[0];
        let lhs = subgradient(&composed, &frame, x).unwrap().components;
        let df = subgradient(&FnField::new(f), &frame, x).unwrap().components;
        for i in 0..2 {
            let rhs = f(x).exp() * df[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn sublaplacian_commutes_with_left_translations((n, p) in step_and_points(2)) {
        let frame = left_frame(GroupDescriptor::new(n).unwrap());
        let f = move |x: &[f64]| (0.4 * x[0]).sin() * x[1] + 0.1 * x[2] * x[2] + 0.05 * x[n];
        let alpha = p[0].clone();
        let translated = FnField::new(move |x: &[f64]| {
            let mut y = vec![0.0; x.len()];
            compose_into(&alpha, x, &mut y);
            f(&y)
        });
        let x = &p[1];
        let lhs = sublaplacian(&translated, &frame, x).unwrap();
        let rhs = sublaplacian(&FnField::new(f), &frame, &compose(&p[0], x)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-4 * (1.0 + rhs.abs()), "{lhs} {rhs}");
    }

    #[test]
    fn extra_constraints_never_lower_the_fit(
        rows in prop::collection::vec((0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64), 1..12),
        extra in (0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64),
    ) {
        let cap = 10.0;
        if let Some((c1, _)) = fit_constants(&rows, cap) {
            let mut more = rows.clone();
            more.push(extra);
            if let Some((c2, _)) = fit_constants(&more, cap) {
                prop_assert!(c2 >= c1 - 1e-12);
            }
        }
    }
}
