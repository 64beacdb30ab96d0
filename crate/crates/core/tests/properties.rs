use nsopt_core::adversary::{
    build_lower_bound_pair, matches_reply, min_kink_separation, query_budget, resisting_reply,
    ResistingTranscript,
};
use nsopt_core::certify::{min_norm_in_hull, Atom, GoldsteinCertificate, DEFAULT_TOL};
use nsopt_core::functions::{make_max_affine, make_zigzag};
use nsopt_core::solvers::alpha_next;
use nsopt_core::Vector;
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0..3.0f64, dim).prop_map(|v| Vector::from_slice(&v))
}

fn atoms() -> impl Strategy<Value = Vec<Vector>> {
    (1usize..4).prop_flat_map(|dim| prop::collection::vec(vector(dim), 1..6))
}

proptest! {
    #[test]
    fn hull_point_is_optimal(points in atoms()) {
        let m = min_norm_in_hull(&points, DEFAULT_TOL).unwrap();
        let sum: f64 = m.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(m.weights.iter().all(|w| *w >= 0.0));
        let mut combo = Vector::zeros(points[0].dim());
        for (p, w) in points.iter().zip(&m.weights) {
            combo = &combo + &p.scaled(*w);
        }
        prop_assert!(combo.distance(&m.witness) < 1e-9);
        // first-order optimality: no atom lies strictly below the witness
        let w2 = m.witness.dot(&m.witness);
        for p in &points {
            prop_assert!(p.dot(&m.witness) >= w2 - 1e-6);
            prop_assert!(m.norm <= p.norm() + 1e-12);
        }
    }

    #[test]
    fn max_affine_gradients_match_directional_derivatives(
        slopes in prop::collection::vec(vector(2), 1..6),
        x in vector(2),
        d in vector(2),
    ) {
        let offsets = vec![0.0; slopes.len()];
        let f = make_max_affine(slopes, offsets).unwrap();
        let g = f.grad_select(&x, &d);
        let dd = f.dir_deriv(&x, &d);
        prop_assert!((g.dot(&d) - dd).abs() <= 1e-9 * (1.0 + dd.abs()));
    }

    #[test]
    fn zigzag_is_lipschitz(
        mut knots in prop::collection::vec(-20.0..20.0f64, 1..5),
        a in -25.0..25.0f64,
        b in -25.0..25.0f64,
    ) {
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|x, y| (*x - *y).abs() < 0.5);
        let f = make_zigzag(&knots, 0.25, 2.0, None).unwrap();
        let (x, y) = (Vector::scalar(a), Vector::scalar(b));
        prop_assert!((f.eval(&x) - f.eval(&y)).abs() <= 2.0 * (a - b).abs() + 1e-9);
    }

    #[test]
    fn alpha_recursion_holds(prev in 0.01..1.0f64, q in 0.0..0.99f64) {
        let a = alpha_next(prev, q);
        prop_assert!(a > 0.0 && a <= 1.0);
        let residual = a * a - ((1.0 - a) * prev * prev + q * a);
        prop_assert!(residual.abs() < 1e-12);
    }

    #[test]
    fn witnesses_reproduce_any_transcript(
        delta in 0.02..0.5f64,
        gap in 1.0..10.0f64,
        seeds in prop::collection::vec(-30.0..30.0f64, 1..200),
    ) {
        let k = (query_budget(delta, gap) as usize).max(1).min(seeds.len());
        let gap = gap.max(8.0 * delta);
        let mut t = ResistingTranscript::gradients_only();
        for &x in &seeds[..k] {
            resisting_reply(&mut t, x);
        }
        let (f, g) = build_lower_bound_pair(&t, delta, gap).unwrap();
        for &x in &seeds[..k] {
            prop_assert!(matches_reply(&f, x, &t.reply()));
            prop_assert!(matches_reply(&g, x, &t.reply()));
        }
        prop_assert!(min_kink_separation(&f, &g).unwrap() > 2.0 * delta);
    }

    #[test]
    fn certificates_round_trip(center in vector(2), grads in prop::collection::vec(vector(2), 1..4)) {
        let w = 1.0 / grads.len() as f64;
        let atoms = grads
            .into_iter()
            .map(|gradient| Atom { point: center.clone(), gradient, weight: w })
            .collect();
        let c = GoldsteinCertificate::new(center, 0.1, atoms);
        let back = GoldsteinCertificate::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
