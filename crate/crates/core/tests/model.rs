mod common;

use isoas::io::parse_problem;
use isoas::model::{build_regions, equilibrium_residual, ReferenceNormalization};
use isoas::oracle::{dare_residual, dare_solution, lqr_gain};
use isoas::{Error, OutputConstraints, Plant, SaturatedLoop};
use nalgebra::{DMatrix, DVector};

fn box_outputs() -> OutputConstraints {
    OutputConstraints::from_rows(
        &[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ],
        &[5.0, 5.0, 1.0, 1.0],
    )
    .unwrap()
}

#[test]
fn lqr_gains_match_frozen_values() {
    let p1 = common::problem("example1");
    let p2 = common::problem("example2");
    let k1 = p1.lp.gain();
    let k2 = p2.lp.gain();
    for (k, want) in [
        (k1, [0.9170415474, 1.6820521590]),
        (k2, [2.2592403945, 2.2767765020]),
    ] {
        for i in 0..2 {
            assert!((k[i] - want[i]).abs() < 1e-8, "{k:?}");
        }
    }
}

#[test]
fn dare_and_equilibrium_residuals_are_small() {
    for name in ["example1", "example2", "example3"] {
        let p = common::problem(name);
        assert!(
            equilibrium_residual(&p.plant, p.lp.basis()) <= 1e-10,
            "{name}"
        );
        let q = DMatrix::identity(2, 2);
        let sol = dare_solution(&p.plant, &q, 1.0).unwrap();
        assert!(dare_residual(&p.plant, &q, 1.0, &sol) <= 1e-10, "{name}");
    }
}

#[test]
fn equilibria_satisfy_the_plant() {
    let p = common::problem("example2");
    for r in p.lp.reference_grid(5) {
        let z = p.lp.equilibrium(r);
        let next = p.lp.saturated_step(&z);
        for (a, b) in z.iter().zip(&next) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn regions_partition_the_band() {
    let p = common::problem("example1");
    let regions = build_regions(&p.lp);
    let (lo, hi) = p.lp.reference_interval();
    let mut rng_state = 1u64;
    for _ in 0..2000 {
        rng_state = rng_state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let u = |s: u64, k: u32| ((s >> k) & 0xffff) as f64 / 65535.0;
        let z = [
            -20.0 + 40.0 * u(rng_state, 0),
            -20.0 + 40.0 * u(rng_state, 16),
            0.99 * (lo + (hi - lo) * u(rng_state, 32)),
        ];
        let hits = [&regions.s, &regions.s_up, &regions.s_lo]
            .iter()
            .filter(|p| p.contains(&z, 0.0))
            .count();
        assert!(hits >= 1, "{z:?}");
    }
}

#[test]
fn unstable_gain_is_rejected() {
    let plant = Plant::from_rows(
        &[vec![1.0, 0.1], vec![0.0, 1.0]],
        &[0.0, 0.1],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[0.0, 0.0],
    )
    .unwrap();
    let lp = SaturatedLoop::new(
        plant,
        box_outputs(),
        DVector::from_vec(vec![-1.0, -1.0]),
        -2.0,
        2.0,
        0.01,
        ReferenceNormalization::Input,
    )
    .unwrap();
    assert!(!lp.validate().schur);
    assert!(matches!(lp.ensure_valid(), Err(Error::Validation { .. })));
}

#[test]
fn lqr_on_unstabilizable_pair_fails() {
    let plant = Plant::from_rows(
        &[vec![2.0, 0.0], vec![0.0, 0.5]],
        &[0.0, 1.0],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[0.0, 0.0],
    )
    .unwrap();
    assert!(lqr_gain(&plant, &DMatrix::identity(2, 2), 1.0).is_err());
}

#[test]
fn schema_errors_are_collected() {
    let text = r#"{"A": [[1.0]], "B": [[1.0, 2.0]], "C": [[1.0]], "D": [[0.0]], "u_min": 1.0, "u_max": -1.0, "H": [[1.0]], "h": [1.0], "epsilon": 2.0, "bogus": 1}"#;
    match parse_problem(text) {
        Err(Error::Schema(errs)) => assert!(errs.len() >= 3, "{errs:?}"),
        other => panic!("{other:?}"),
    }
}
