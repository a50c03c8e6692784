use isoas::geometry::{nonredundant_rows, polygon_area, remove_redundant_rows, vertices_2d};
use isoas::{LpResult, Polyhedron, Tolerances};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_box(dim: usize, half: f64) -> Polyhedron {
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut a = vec![0.0; dim];
            a[i] = s;
            normals.push(a);
            offsets.push(half);
        }
    }
    Polyhedron::new(dim, normals, offsets).unwrap()
}

#[test]
fn box_lp_optimum_is_corner() {
    let tol = Tolerances::default();
    let p = unit_box(3, 2.0);
    match p.maximize(&[1.0, -2.0, 0.5], &tol).unwrap() {
        LpResult::Optimal { point, value } => {
            assert!((value - 7.0).abs() <= 1e-9);
            assert!((point[0] - 2.0).abs() <= 1e-9);
            assert!((point[1] + 2.0).abs() <= 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn redundant_row_detected_and_dropped() {
    let tol = Tolerances::default();
    let region = unit_box(2, 1.0);
    let extra = Polyhedron::new(2, vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![3.0, 0.5]).unwrap();
    assert_eq!(nonredundant_rows(&extra, &region, &tol).unwrap(), vec![1]);
    let kept = remove_redundant_rows(&extra, &region, &tol).unwrap();
    assert_eq!(kept.n_rows(), 1);
    assert_eq!(kept.offset(0), 0.5);
}

#[test]
fn duplicate_rows_keep_one() {
    let tol = Tolerances::default();
    let g = Polyhedron::new(2, vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
    let kept = remove_redundant_rows(&g, &unit_box(2, 1.0), &tol).unwrap();
    assert_eq!(kept.n_rows(), 1);
}

#[test]
fn empty_and_unbounded_detected() {
    let tol = Tolerances::default();
    let empty = Polyhedron::new(1, vec![vec![1.0], vec![-1.0]], vec![-1.0, 0.0]).unwrap();
    assert!(empty.is_empty(&tol).unwrap());
    assert!(empty.bounding_box(&tol).unwrap().is_none());
    let half = Polyhedron::new(2, vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
    assert!(matches!(
        half.maximize(&[0.0, 1.0], &tol).unwrap(),
        LpResult::Unbounded
    ));
    assert!(half.bounding_box(&tol).is_err());
}

#[test]
fn polygon_vertices_and_area() {
    let tol = Tolerances::default();
    let v = vertices_2d(&unit_box(2, 1.0), &tol).unwrap();
    assert_eq!(v.len(), 4);
    assert!((polygon_area(&v) - 4.0).abs() < 1e-9);
}

#[test]
fn json_round_trip() {
    let p = Polyhedron::new(2, vec![vec![1.0, 2.0]], vec![3.0]).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    assert!(text.contains("\"H\""));
    let back: Polyhedron = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
}

fn random_poly(rng: &mut ChaCha8Rng, dim: usize, rows: usize) -> Polyhedron {
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for _ in 0..rows {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if a.iter().all(|v: &f64| v.abs() < 1e-3) {
            continue;
        }
        normals.push(a);
        offsets.push(rng.random_range(0.2..2.0));
    }
    Polyhedron::new(dim, normals, offsets).unwrap()
}

#[test]
fn redundancy_preserves_membership_on_random_samples() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let context = unit_box(3, 1.5);
        let gen = random_poly(&mut rng, 3, 25);
        let reduced = remove_redundant_rows(&gen, &context, &tol).unwrap();
        let full = context.intersect(&gen).unwrap();
        let kept = context.intersect(&reduced).unwrap();
        for _ in 0..1000 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.6..1.6)).collect();
            // Points well clear of every boundary must agree exactly.
            if full.max_violation(&z).abs() < 1e-6 {
                continue;
            }
            assert_eq!(full.contains(&z, 0.0), kept.contains(&z, 0.0), "{z:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersect_commutes(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_poly(&mut rng, 2, 4);
        let b = random_poly(&mut rng, 2, 5);
        let ab = a.intersect(&b).unwrap();
        let ba = b.intersect(&a).unwrap();
        for _ in 0..50 {
            let z = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            prop_assert_eq!(ab.contains(&z, 0.0), ba.contains(&z, 0.0));
        }
    }

    #[test]
    fn cross_section_commutes_with_intersect(seed in 0u64..10_000, r in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_poly(&mut rng, 3, 4);
        let b = random_poly(&mut rng, 3, 4);
        let lhs = a.intersect(&b).unwrap().cross_section(r);
        let rhs = a.cross_section(r).intersect(&b.cross_section(r)).unwrap();
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            prop_assert_eq!(lhs.contains(&x, 0.0), rhs.contains(&x, 0.0));
        }
    }

    #[test]
    fn tighten_is_strict_subset(seed in 0u64..10_000, eps in 0.01f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(&mut rng, 2, 6);
        let t = p.tighten(eps).unwrap();
        for _ in 0..100 {
            let z = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            if t.contains(&z, 0.0) {
                prop_assert!(p.contains(&z, 0.0));
            }
        }
        // The origin is interior to p, and the offsets shrink by exactly (1 - eps).
        for (o, ot) in p.offsets().iter().zip(t.offsets()) {
            prop_assert!((ot - (1.0 - eps) * o).abs() <= 1e-12 * o.abs().max(1.0));
            prop_assert!(ot < o);
        }
    }

    #[test]
    fn box_lp_optimum_matches_closed_form(c in proptest::collection::vec(-5.0f64..5.0, 4), half in 0.1f64..10.0) {
        let tol = Tolerances::default();
        let p = unit_box(4, half);
        let expect: f64 = c.iter().map(|v| v.abs() * half).sum();
        match p.maximize(&c, &tol).unwrap() {
            LpResult::Optimal { value, point } => {
                prop_assert!((value - expect).abs() <= 1e-9 * expect.max(1.0));
                prop_assert!(p.contains(&point, 1e-9));
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
