use super::{dot, LpResult, Polyhedron, Tolerances};
use crate::error::{Error, Result};

/// Counter-clockwise vertices of a bounded planar polygon.
///
/// Returns an empty list for an empty set and `Error::Unbounded` when the
/// polygon is unbounded. Degenerate sets yield one vertex (a point) or two
/// (a segment).
pub fn vertices_2d(poly: &Polyhedron, tol: &Tolerances) -> Result<Vec<[f64; 2]>> {
    if poly.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: poly.dim(),
        });
    }
    let mut anchors = Vec::with_capacity(4);
    for c in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
        match poly.maximize(&c, tol)? {
            LpResult::Infeasible => return Ok(Vec::new()),
            LpResult::Unbounded => return Err(Error::Unbounded),
            LpResult::Optimal { point, .. } => anchors.push([point[0], point[1]]),
        }
    }

    // Scale-aware acceptance for candidate intersections.
    let scale = anchors
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let accept = tol.feas.max(1e-12 * scale);

    let unit = poly.normalized();
    let rows: Vec<(&[f64], f64)> = unit.rows().collect();
    let mut candidates: Vec<[f64; 2]> = anchors;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (rows[i].0, rows[j].0);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (rows[i].1 * b[1] - rows[j].1 * a[1]) / det;
            let y = (a[0] * rows[j].1 - b[0] * rows[i].1) / det;
            let p = [x, y];
            if rows.iter().all(|(n, o)| dot(n, &p) <= o + accept) {
                candidates.push(p);
            }
        }
    }

    let mut merged: Vec<[f64; 2]> = Vec::new();
    for p in candidates {
        if !merged.iter().any(|q| dist(&p, q) <= tol.geom) {
            merged.push(p);
        }
    }
    if merged.len() <= 2 {
        return Ok(merged);
    }

    let cx = merged.iter().map(|p| p[0]).sum::<f64>() / merged.len() as f64;
    let cy = merged.iter().map(|p| p[1]).sum::<f64>() / merged.len() as f64;
    merged.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });

    // Drop points lying in the middle of an edge.
    let mut hull = merged;
    loop {
        let m = hull.len();
        if m <= 2 {
            break;
        }
        let drop = (0..m).find(|&k| {
            let prev = hull[(k + m - 1) % m];
            let cur = hull[k];
            let next = hull[(k + 1) % m];
            let cross =
                (cur[0] - prev[0]) * (next[1] - prev[1]) - (cur[1] - prev[1]) * (next[0] - prev[0]);
            cross.abs() <= tol.geom * dist(&prev, &next).max(1.0)
        });
        match drop {
            Some(k) => {
                hull.remove(k);
            }
            None => break,
        }
    }
    Ok(hull)
}

fn dist(p: &[f64; 2], q: &[f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Signed area of an ordered polygon (positive when counter-clockwise).
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    let m = vertices.len();
    if m < 3 {
        return 0.0;
    }
    (0..m)
        .map(|i| {
            let (p, q) = (vertices[i], vertices[(i + 1) % m]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn box_has_four_ccw_vertices() {
        let b = Polyhedron::new(
            2,
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            vec![1.0; 4],
        )
        .unwrap();
        let v = vertices_2d(&b, &tol()).unwrap();
        assert_eq!(v.len(), 4);
        assert!((polygon_area(&v) - 4.0).abs() < 1e-12);
        for p in &v {
            assert!((p[0].abs() - 1.0).abs() < 1e-12 && (p[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle() {
        let t = Polyhedron::new(
            2,
            vec![
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
                vec![1.0, 1.0],
                vec![2.0, 2.0],
            ],
            vec![0.0, 0.0, 1.0, 3.0],
        )
        .unwrap();
        let v = vertices_2d(&t, &tol()).unwrap();
        assert_eq!(v.len(), 3);
        assert!((polygon_area(&v) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slab_is_unbounded() {
        let s = Polyhedron::new(2, vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![2.0, 2.0]).unwrap();
        assert!(matches!(vertices_2d(&s, &tol()), Err(Error::Unbounded)));
    }

    #[test]
    fn empty_polygon() {
        let e = Polyhedron::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, -1.0]).unwrap();
        assert!(vertices_2d(&e, &tol()).unwrap().is_empty());
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(vertices_2d(&Polyhedron::universe(3), &tol()).is_err());
    }
}
