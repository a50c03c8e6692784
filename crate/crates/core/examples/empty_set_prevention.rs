//! Example 1 with and without the k = 1 filter in the saturated regions.

use isoas::io::load_problem;
use isoas::{compute_isoas, IsoasConfig};

fn main() -> isoas::Result<()> {
    let p = load_problem(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/example1.json"
    ))?;
    let base = IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    };
    for prevention in [true, false] {
        let cfg = IsoasConfig {
            empty_set_prevention: prevention,
            ..base
        };
        let res = compute_isoas(&p.lp, &cfg)?;
        let empty = res
            .sets()
            .map(|s| s.is_empty(&cfg.tolerances).unwrap_or(true));
        let dropped: Vec<_> = res.trace.iter().map(|t| t.prevention_dropped).collect();
        println!("prevention {prevention:5}: empty [Q, Q_up, Q_lo] = {empty:?}, rows dropped per round {dropped:?}");
    }
    Ok(())
}
