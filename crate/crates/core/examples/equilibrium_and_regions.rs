//! Equilibrium basis, reference set and the three saturation regions.
//!
//! Usage: `cargo run --example equilibrium_and_regions [problem.json]`

use isoas::io::load_problem;
use isoas::model::build_regions;

fn main() -> isoas::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example1.json").into());
    let p = load_problem(&path)?;
    let d = p.lp.validate();
    println!("G_x = {:?}, G_u = {}, G_y = {:?}", d.g_x, d.g_u, d.g_y);
    println!("equilibrium residual {:.2e}", d.equilibrium_residual);
    println!(
        "closed-loop spectral radius {:.4} (Schur: {})",
        d.spectral_radius, d.schur
    );
    println!("(1 - eps)R = {:?}", d.reference_interval);

    let regions = build_regions(&p.lp);
    for (label, set) in [
        ("S", &regions.s),
        ("S_up", &regions.s_up),
        ("S_lo", &regions.s_lo),
    ] {
        println!("{label}: {} rows", set.n_rows());
    }
    let r = 0.5 * d.reference_interval.1;
    let z = p.lp.equilibrium(r);
    println!(
        "equilibrium at r = {r}: {z:?}, inside S: {}",
        regions.s.contains(&z, 1e-9)
    );
    Ok(())
}
