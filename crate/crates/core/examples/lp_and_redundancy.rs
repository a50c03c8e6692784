//! Polyhedra, LPs, redundancy elimination and planar vertices.

use isoas::geometry::{polygon_area, remove_redundant_rows, vertices_2d};
use isoas::{LpResult, Polyhedron, Tolerances};

fn main() -> isoas::Result<()> {
    let tol = Tolerances::default();
    let square = Polyhedron::new(
        2,
        vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ],
        vec![1.0; 4],
    )?;
    if let LpResult::Optimal { point, value } = square.maximize(&[2.0, 1.0], &tol)? {
        println!("max 2x + y over the square: {value} at {point:?}");
    }

    let cuts = Polyhedron::new(
        2,
        vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, -1.0]],
        vec![1.5, 3.0, 5.0],
    )?;
    let kept = remove_redundant_rows(&cuts, &square, &tol)?;
    println!("{} of {} cuts are needed:", kept.n_rows(), cuts.n_rows());
    for (a, b) in kept.rows() {
        println!("  {a:?} . z <= {b}");
    }

    let clipped = square.intersect(&kept)?;
    let verts = vertices_2d(&clipped, &tol)?;
    println!("vertices: {verts:?}");
    println!("area: {}", polygon_area(&verts));
    println!("shrunk by 10%: {:?}", square.tighten(0.1)?.offsets());
    Ok(())
}
