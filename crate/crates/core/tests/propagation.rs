mod common;

use isoas::model::{build_regions, RegionKind};
use isoas::propagation::{
    advance_generation, apply_empty_set_prevention, control_authority, propagate_nonsat,
    propagate_saturated, sat_seed, PropagationConfig,
};
use isoas::{ConstraintBundle, Polyhedron};

#[test]
fn control_authority_on_example2() {
    let p = common::problem("example2");
    let (up, lo) = control_authority(&p.plant, p.lp.gain(), p.lp.u_lo(), p.lp.u_hi(), p.lp.eps());
    assert!(up.applicable && lo.applicable);
    let xb = up.x_bar.unwrap();
    let xl = lo.x_bar.unwrap();
    assert!((xb[0] + 2.0).abs() <= 1e-9 && xb[1].abs() <= 1e-9);
    assert!((xl[0] - 2.0).abs() <= 1e-9 && xl[1].abs() <= 1e-9);
    assert!(up.condition_value.unwrap() <= 0.0);
    // The upper row excludes the bad equilibrium and keeps the origin.
    let (row, off) = up.row.unwrap();
    let z_bad = [xb[0], xb[1], 0.0];
    let lhs: f64 = row.iter().zip(&z_bad).map(|(a, b)| a * b).sum();
    assert!(lhs > off);
    assert!(off > 0.0);
}

#[test]
fn control_authority_inapplicable_on_example3() {
    let p = common::problem("example3");
    let (up, _) = control_authority(&p.plant, p.lp.gain(), p.lp.u_lo(), p.lp.u_hi(), p.lp.eps());
    assert!(!up.applicable);
    assert!(up.condition_value.unwrap() > 0.0);
    assert!(up.row.is_none());
}

#[test]
fn nonsat_propagation_terminates_and_is_invariant() {
    let p = common::problem("example1");
    let regions = build_regions(&p.lp);
    let cfg = PropagationConfig::default();
    let seed = ConstraintBundle::seed(
        isoas::propagation::nonsat_seed(&p.lp),
        RegionKind::NonSaturated,
    );
    let res = propagate_nonsat(&p.lp, &regions.s, &seed, &cfg).unwrap();
    assert!(res.steps >= 1 && res.steps < cfg.caps.k_max);
    assert!(!res.q.is_empty(&cfg.tolerances).unwrap());
    // Pulling every retained row back once more adds nothing.
    let again = advance_generation(&p.lp, RegionKind::NonSaturated, &res.bundle.flatten());
    let kept = isoas::geometry::remove_redundant_rows(&again, &res.q, &cfg.tolerances).unwrap();
    assert_eq!(kept.n_rows(), 0);
}

#[test]
fn redundant_seed_stops_after_one_pull_back() {
    let p = common::problem("example1");
    let regions = build_regions(&p.lp);
    let cfg = PropagationConfig::default();
    let loose = Polyhedron::new(3, vec![vec![0.0, 0.0, 1.0]], vec![100.0]).unwrap();
    let res = propagate_nonsat(
        &p.lp,
        &regions.s,
        &ConstraintBundle::seed(loose, RegionKind::NonSaturated),
        &cfg,
    )
    .unwrap();
    assert_eq!(res.bundle.n_rows(), 0);
    assert_eq!(res.q.n_rows(), regions.s.n_rows());
    assert!(res.steps <= 1);
}

#[test]
fn prevention_keeps_upper_set_nonempty_on_example1() {
    let p = common::problem("example1");
    let regions = build_regions(&p.lp);
    let seed = ConstraintBundle::seed(
        sat_seed(&p.lp, RegionKind::UpperSaturated),
        RegionKind::UpperSaturated,
    );
    let on = PropagationConfig::default();
    let off = PropagationConfig {
        empty_set_prevention: false,
        ..on
    };
    let with =
        propagate_saturated(&p.lp, RegionKind::UpperSaturated, &regions.s_up, &seed, &on).unwrap();
    let without = propagate_saturated(
        &p.lp,
        RegionKind::UpperSaturated,
        &regions.s_up,
        &seed,
        &off,
    )
    .unwrap();
    assert!(!with.q.is_empty(&on.tolerances).unwrap());
    assert!(with.prevention_dropped > 0);
    assert!(without.q.is_empty(&on.tolerances).unwrap());
}

#[test]
fn explicit_prevention_filter_drops_rows() {
    let p = common::problem("example1");
    let tol = Default::default();
    let regions = build_regions(&p.lp);
    let gen0 = isoas::geometry::remove_redundant_rows(
        &sat_seed(&p.lp, RegionKind::UpperSaturated),
        &regions.s_up,
        &tol,
    )
    .unwrap();
    let gen1 = advance_generation(&p.lp, RegionKind::UpperSaturated, &gen0);
    let kept = apply_empty_set_prevention(
        &p.lp,
        RegionKind::UpperSaturated,
        &gen1,
        &gen0,
        &regions.s_up,
        &tol,
    )
    .unwrap();
    assert!(kept.n_rows() < gen1.n_rows());
    assert!(apply_empty_set_prevention(
        &p.lp,
        RegionKind::NonSaturated,
        &gen1,
        &gen0,
        &regions.s,
        &tol
    )
    .is_err());
}
