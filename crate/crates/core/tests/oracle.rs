mod common;

use isoas::oracle::{
    compare_slices, containment_check, omega_membership, saturate, simulate, verify_set,
    OmegaStatus, SetUnderTest, VerifyConfig,
};

#[test]
fn saturation_clips() {
    assert_eq!(saturate(3.0, -2.0, 2.0), 2.0);
    assert_eq!(saturate(-3.0, -2.0, 2.0), -2.0);
    assert_eq!(saturate(0.5, -2.0, 2.0), 0.5);
}

#[test]
fn simulation_converges_to_the_equilibrium() {
    let p = common::problem("example1");
    let r = 1.0;
    let traj = simulate(&p.lp, &[0.0, 0.0], r, 400).unwrap();
    assert_eq!(traj.states.len(), 401);
    let z = p.lp.equilibrium(r);
    let last = traj.states.last().unwrap();
    assert!((last[0] - z[0]).abs() < 1e-6 && (last[1] - z[1]).abs() < 1e-6);
    assert!(traj.inputs.iter().all(|u| u.abs() <= 2.0));
    assert!(simulate(&p.lp, &[0.0], r, 10).is_err());
    assert!(simulate(&p.lp, &[0.0, 0.0], r, 0).is_err());
}

#[test]
fn omega_membership_classifies_obvious_points() {
    let p = common::problem("example1");
    let cfg = common::config(&p);
    let (_, moas) = common::solve(&p, &cfg);
    let tol = cfg.tolerances;
    assert_eq!(
        omega_membership(&p.lp, &moas, &p.lp.equilibrium(0.0), 100, &tol),
        OmegaStatus::Member(0)
    );
    assert!(matches!(
        omega_membership(&p.lp, &moas, &[6.0, 0.0, 0.0], 100, &tol),
        OmegaStatus::NonMember(0)
    ));
    // Inside the output box but moving too fast to stop in time.
    assert!(matches!(
        omega_membership(&p.lp, &moas, &[4.9, 0.99, 0.0], 100, &tol),
        OmegaStatus::NonMember(_)
    ));
}

#[test]
fn verification_passes_on_all_examples() {
    for name in ["example1", "example2", "example3"] {
        let p = common::problem(name);
        let cfg = common::config(&p);
        let (res, moas) = common::solve(&p, &cfg);
        let vcfg = VerifyConfig {
            samples: 2000,
            horizon: 200,
            seed: 11,
            ..VerifyConfig::default()
        };
        let report = verify_set(SetUnderTest::Isoas(&res), &p.lp, &moas, &vcfg).unwrap();
        assert!(report.passed(), "{name}: {report:?}");
        assert_eq!(report.samples, 2000);
        let base = verify_set(SetUnderTest::Moas(&moas), &p.lp, &moas, &vcfg).unwrap();
        assert!(base.passed(), "{name} baseline");
    }
}

#[test]
fn verification_catches_a_bloated_set() {
    let p = common::problem("example1");
    let cfg = common::config(&p);
    let (mut res, moas) = common::solve(&p, &cfg);
    // Replace Q by the raw region: admissible outputs are no longer enforced.
    res.q = res.regions.s.clone();
    let rows: Vec<Vec<f64>> = vec![
        vec![1.0, 0.0, 0.0],
        vec![-1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, -1.0, 0.0],
    ];
    res.q = res
        .q
        .intersect(&isoas::Polyhedron::new(3, rows, vec![20.0; 4]).unwrap())
        .unwrap();
    let vcfg = VerifyConfig {
        samples: 500,
        horizon: 50,
        ..VerifyConfig::default()
    };
    let report = verify_set(SetUnderTest::Isoas(&res), &p.lp, &moas, &vcfg).unwrap();
    assert!(!report.passed());
    assert!(report.output_violations > 0);
}

#[test]
fn containment_and_comparison() {
    let p = common::problem("example1");
    let cfg = common::config(&p);
    let (res, moas) = common::solve(&p, &cfg);
    let rep = containment_check(
        &res,
        &moas,
        &p.lp.reference_grid(5),
        300,
        3,
        &cfg.tolerances,
    )
    .unwrap();
    assert!(rep.contained() && rep.strict(), "{rep:?}");
    let cmp = compare_slices(&p.lp, &res, &moas, &[0.0], 21, 500, &cfg.tolerances).unwrap();
    assert!(cmp.moas_subset_isoas && cmp.isoas_subset_omega);
    assert_eq!(cmp.slices[0].isoas_nonmember, 0);
}
