//! Example 2 with and without filtering of the shared saturated rows, and
//! the resulting containment of the linear-loop admissible set.

use isoas::io::load_problem;
use isoas::oracle::containment_check;
use isoas::{compute_isoas, compute_moas, IsoasConfig, Polyhedron};

fn main() -> isoas::Result<()> {
    let p = load_problem(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/example2.json"
    ))?;
    let base = IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    };
    let moas = compute_moas(&p.lp, &base)?;
    for erosion in [true, false] {
        let cfg = IsoasConfig {
            erosion_prevention: erosion,
            ..base
        };
        let res = compute_isoas(&p.lp, &cfg)?;
        let rep = containment_check(
            &res,
            &moas,
            &p.lp.reference_grid(21),
            500,
            0,
            &cfg.tolerances,
        )?;
        let eroded: Vec<_> = res.trace.iter().map(|t| t.erosion_dropped).collect();
        println!(
            "filter {erosion:5}: rows {:?}, dropped per round {eroded:?}, baseline vertices outside {}/{}",
            res.sets().map(Polyhedron::n_rows),
            rep.vertices_outside,
            rep.vertices_checked
        );
    }
    Ok(())
}
