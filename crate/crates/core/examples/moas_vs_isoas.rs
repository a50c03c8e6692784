//! Cross-sections of the baseline and saturated sets, written as vertex CSV.
//!
//! Usage: `cargo run --example moas_vs_isoas [problem.json] [r] [out.csv]`

use isoas::io::{load_problem, slice_polygon, vertex_csv};
use isoas::oracle::compare_slices;
use isoas::{compute_isoas, compute_moas, geometry::polygon_area, IsoasConfig};

fn main() -> isoas::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example3.json").into());
    let r: f64 = args
        .next()
        .map_or(0.0, |s| s.parse().expect("r must be a number"));
    let out = args.next();

    let p = load_problem(&path)?;
    let cfg = IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    };
    let res = compute_isoas(&p.lp, &cfg)?;
    let moas = compute_moas(&p.lp, &cfg)?;
    let mut polygons = Vec::new();
    for (label, set) in [
        ("moas", &moas.o),
        ("Q", &res.q),
        ("Q_up", &res.q_up),
        ("Q_lo", &res.q_lo),
    ] {
        let poly = slice_polygon(set, r, &cfg.tolerances)?;
        println!(
            "{label:5} at r = {r}: {} vertices, area {:.4}",
            poly.len(),
            polygon_area(&poly)
        );
        polygons.push(poly);
    }
    let cmp = compare_slices(&p.lp, &res, &moas, &[r], 41, 1000, &cfg.tolerances)?;
    let s = &cmp.slices[0];
    println!(
        "grid {}: baseline {}, saturated union {}, simulated members {}",
        s.grid_points, s.in_moas, s.in_isoas, s.omega_member
    );
    if let Some(out) = out {
        std::fs::write(&out, vertex_csv(&polygons))?;
        println!("wrote {out}");
    }
    Ok(())
}
