#![allow(dead_code)]

use std::path::PathBuf;

use isoas::io::{load_problem, Problem};
use isoas::{compute_isoas, compute_moas, IsoasConfig, IsoasResult, MoasResult};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

pub fn problem(name: &str) -> Problem {
    load_problem(scenario_path(name)).expect("scenario loads")
}

pub fn config(p: &Problem) -> IsoasConfig {
    IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    }
}

pub fn solve(p: &Problem, cfg: &IsoasConfig) -> (IsoasResult, MoasResult) {
    let res = compute_isoas(&p.lp, cfg).expect("isoas");
    let moas = compute_moas(&p.lp, cfg).expect("moas");
    (res, moas)
}
