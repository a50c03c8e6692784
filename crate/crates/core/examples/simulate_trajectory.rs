//! Saturated closed-loop trajectory from a point in the saturated set.

use isoas::io::{load_problem, trajectory_csv};
use isoas::oracle::{simulate, slice_vertices};
use isoas::{compute_isoas, IsoasConfig};

fn main() -> isoas::Result<()> {
    let p = load_problem(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/example1.json"
    ))?;
    let cfg = IsoasConfig {
        tolerances: p.tolerances,
        caps: p.caps,
        ..IsoasConfig::default()
    };
    let res = compute_isoas(&p.lp, &cfg)?;
    // Start from the extreme vertex of the upper-saturated slice.
    let r = 2.0;
    let verts = slice_vertices(&res.q_up, r, &cfg.tolerances)?;
    let z0 = verts
        .iter()
        .min_by(|a, b| a[0].total_cmp(&b[0]))
        .expect("nonempty slice");
    let x0 = [z0[0], z0[1]];
    println!(
        "start {x0:?} at r = {r}, in the saturated set: {}",
        res.contains(z0)
    );
    let traj = simulate(&p.lp, &x0, r, 80)?;
    let saturated = traj.saturated.iter().filter(|&&s| s).count();
    let worst = traj
        .outputs
        .iter()
        .map(|y| p.outputs.violation(&nalgebra::DVector::from_vec(y.clone())))
        .fold(f64::NEG_INFINITY, f64::max);
    println!("{saturated} saturated steps, worst output margin {worst:.4}");
    println!("final state {:?}", traj.states.last().unwrap());
    print!(
        "{}",
        trajectory_csv(&traj)
            .lines()
            .take(6)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!("\n...");
    Ok(())
}
