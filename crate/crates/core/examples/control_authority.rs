//! Detects saturated equilibria that the controller cannot leave, and the
//! seed row that excludes them.

use isoas::io::load_problem;
use isoas::propagation::control_authority;

fn main() -> isoas::Result<()> {
    for name in ["example2", "example3"] {
        let p = load_problem(format!(
            "{}/scenarios/{name}.json",
            env!("CARGO_MANIFEST_DIR")
        ))?;
        let (up, lo) =
            control_authority(&p.plant, p.lp.gain(), p.lp.u_lo(), p.lp.u_hi(), p.lp.eps());
        println!("{name}: 1 + K(I - A)^-1 B = {:?}", up.condition_value);
        println!("  applicable: {}", up.applicable);
        println!("  upper saturated equilibrium {:?}", up.x_bar);
        println!("  lower saturated equilibrium {:?}", lo.x_bar);
        if let Some((row, off)) = &up.row {
            println!("  upper seed row {row:?} . z <= {off:.6}");
        }
        if let Some((row, off)) = &lo.row {
            println!("  lower seed row {row:?} . z <= {off:.6}");
        }
    }
    Ok(())
}
