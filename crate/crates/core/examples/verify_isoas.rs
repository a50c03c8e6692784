//! Monte Carlo certificate of safety and one-step invariance.
//!
//! Usage: `cargo run --release --example verify_isoas [problem.json] [samples]`

use isoas::io::load_problem;
use isoas::oracle::{verify_set, SetUnderTest, VerifyConfig};
use isoas::{compute_isoas, compute_moas, IsoasConfig};

fn main() -> isoas::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example2.json").into());
    let samples = args
        .next()
        .map_or(2000, |s| s.parse().expect("sample count"));
    let p = load_problem(&path)?;
    let cfg = IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    };
    let res = compute_isoas(&p.lp, &cfg)?;
    let moas = compute_moas(&p.lp, &cfg)?;
    let vcfg = VerifyConfig {
        samples,
        tolerances: cfg.tolerances,
        ..VerifyConfig::default()
    };
    let report = verify_set(SetUnderTest::Isoas(&res), &p.lp, &moas, &vcfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("passed: {}", report.passed());
    Ok(())
}
