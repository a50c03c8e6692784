//! LQR gain from the discrete Riccati equation, with its residual.

use isoas::oracle::{dare_residual, dare_solution, lqr_gain};
use isoas::Plant;
use nalgebra::DMatrix;

fn main() -> isoas::Result<()> {
    let plant = Plant::from_rows(
        &[vec![1.0, 0.1], vec![0.1, 1.0]],
        &[0.0, 0.1],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[0.0, 0.0],
    )?;
    let q = DMatrix::identity(2, 2);
    let k = lqr_gain(&plant, &q, 1.0)?;
    let p = dare_solution(&plant, &q, 1.0)?;
    println!("K = {:?}", k.as_slice());
    println!("P = {p}");
    println!(
        "Riccati residual {:.2e}",
        dare_residual(&plant, &q, 1.0, &p)
    );
    let cl = &plant.a - &plant.b * k.transpose();
    println!(
        "closed-loop eigenvalues {:?}",
        cl.complex_eigenvalues().as_slice()
    );
    Ok(())
}
