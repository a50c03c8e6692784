//! Dense simplex for `max cᵀz s.t. Hz ≤ h` with free `z`.
//!
//! The problems met here have a tiny ambient dimension (d ≤ 4) and up to a
//! few hundred rows, so the solver works on the dual
//!
//! ```text
//! min hᵀy  s.t.  Hᵀy = c,  y ≥ 0
//! ```
//!
//! whose tableau has only `d` rows. The primal optimizer is read back from
//! the simplex multipliers of the final basis. Pivoting follows Bland's rule,
//! which cannot cycle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const REDUCED_COST_TOL: f64 = 1e-11;
const PHASE_ONE_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 20_000;

/// Outcome of a linear program.
#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { point: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Status tag of an [`LpResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn status(&self) -> LpStatus {
        match self {
            LpResult::Optimal { .. } => LpStatus::Optimal,
            LpResult::Infeasible => LpStatus::Infeasible,
            LpResult::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn optimizer(&self) -> Option<&[f64]> {
        match self {
            LpResult::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// A borrowed half-space `normal · z ≤ offset`.
pub(crate) type RowRef<'a> = (&'a [f64], f64);

enum DualOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

/// Maximizes `c·z` over the rows. `feas_tol` bounds the primal residual
/// accepted for an optimal point.
pub(crate) fn maximize(c: &[f64], rows: &[RowRef<'_>], feas_tol: f64) -> Result<LpResult> {
    let d = c.len();
    if let Some((normal, _)) = rows.iter().find(|(normal, _)| normal.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: normal.len(),
        });
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "objective has non-finite entries".into(),
        ));
    }

    match solve_dual(c, rows)? {
        DualOutcome::Optimal(point) => {
            let point = polish(point, c, rows, feas_tol)?;
            let value = dot(c, &point);
            Ok(LpResult::Optimal { point, value })
        }
        // An unbounded dual certifies an empty primal.
        DualOutcome::Unbounded => Ok(LpResult::Infeasible),
        // An infeasible dual leaves the primal infeasible or unbounded;
        // the zero objective always has a feasible dual, so it decides.
        DualOutcome::Infeasible => {
            let zero = vec![0.0; d];
            match solve_dual(&zero, rows)? {
                DualOutcome::Optimal(_) => Ok(LpResult::Unbounded),
                DualOutcome::Unbounded => Ok(LpResult::Infeasible),
                DualOutcome::Infeasible => Err(Error::Solver(
                    "dual of the feasibility problem reported infeasible".into(),
                )),
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_violation(point: &[f64], rows: &[RowRef<'_>]) -> f64 {
    rows.iter()
        .map(|(normal, offset)| dot(normal, point) - offset)
        .fold(0.0, f64::max)
}

/// Re-solves the active rows for a cleaner vertex when they pin `z` down,
/// then checks primal feasibility.
fn polish(point: Vec<f64>, c: &[f64], rows: &[RowRef<'_>], feas_tol: f64) -> Result<Vec<f64>> {
    let d = c.len();
    let value = dot(c, &point);
    let scale = |offset: f64| feas_tol * offset.abs().max(1.0);
    let mut active: Vec<usize> = (0..rows.len())
        .filter(|&i| {
            let (normal, offset) = rows[i];
            (dot(normal, &point) - offset).abs() <= scale(offset)
        })
        .collect();
    active.truncate(64);

    let mut best = point;
    let mut best_violation = max_violation(&best, rows);
    if active.len() >= d && d > 0 {
        let a = DMatrix::from_fn(active.len(), d, |i, j| rows[active[i]].0[j]);
        let b = DVector::from_fn(active.len(), |i, _| rows[active[i]].1);
        let svd = a.svd(true, true);
        let smallest = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        if largest > 0.0 && smallest > 1e-9 * largest {
            if let Ok(candidate) = svd.solve(&b, 1e-12) {
                let candidate: Vec<f64> = candidate.iter().cloned().collect();
                let violation = max_violation(&candidate, rows);
                let drift = (dot(c, &candidate) - value).abs();
                if violation <= best_violation && drift <= 1e-9 * value.abs().max(1.0) {
                    best = candidate;
                    best_violation = violation;
                }
            }
        }
    }

    let worst = rows
        .iter()
        .map(|(normal, offset)| (dot(normal, &best) - offset) - scale(*offset))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > 0.0 {
        return Err(Error::Solver(format!(
            "optimal point violates constraints by {best_violation:.3e} (tolerance {feas_tol:.1e})"
        )));
    }
    Ok(best)
}

/// Tableau for `min fᵀy s.t. Ay = b, y ≥ 0` with `d` equality rows,
/// `m` structural columns and `d` artificial columns.
struct Tableau {
    d: usize,
    m: usize,
    width: usize,
    data: Vec<f64>,
    objective: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        self.data[row * w + col] = 1.0;
        for i in 0..self.d {
            if i == row {
                continue;
            }
            let factor = self.data[i * w + col];
            if factor != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= factor * self.data[row * w + j];
                }
                self.data[i * w + col] = 0.0;
            }
        }
        let factor = self.objective[col];
        if factor != 0.0 {
            for j in 0..w {
                self.objective[j] -= factor * self.data[row * w + j];
            }
            self.objective[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs Bland-rule pivots over the structural columns until optimal.
    /// Returns `false` on an unbounded ray.
    fn optimize(&mut self) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.m).find(|&j| self.objective[j] < -REDUCED_COST_TOL);
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.d {
                let a = self.at(i, col);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                        if ratio < best_ratio && !tie || tie && self.basis[i] < self.basis[best] {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            match leaving {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(false),
            }
        }
        Err(Error::Solver(format!(
            "simplex exceeded {MAX_PIVOTS} pivots (d = {}, rows = {})",
            self.d, self.m
        )))
    }
}

fn solve_dual(c: &[f64], rows: &[RowRef<'_>]) -> Result<DualOutcome> {
    let d = c.len();
    let m = rows.len();
    if m == 0 {
        return Ok(if c.iter().all(|&v| v == 0.0) {
            DualOutcome::Optimal(vec![0.0; d])
        } else {
            DualOutcome::Infeasible
        });
    }

    let width = m + d + 1;
    let mut data = vec![0.0; d * width];
    let signs: Vec<f64> = c
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    for i in 0..d {
        for (j, (normal, _)) in rows.iter().enumerate() {
            data[i * width + j] = signs[i] * normal[i];
        }
        data[i * width + m + i] = 1.0;
        data[i * width + width - 1] = signs[i] * c[i];
    }
    let mut tab = Tableau {
        d,
        m,
        width,
        data,
        objective: vec![0.0; width],
        basis: (m..m + d).collect(),
    };

    // Phase one: minimize the sum of artificials.
    for j in 0..m {
        tab.objective[j] = -(0..d).map(|i| tab.at(i, j)).sum::<f64>();
    }
    tab.objective[width - 1] = -(0..d).map(|i| tab.rhs(i)).sum::<f64>();
    tab.optimize()?;
    let infeasibility = -tab.objective[width - 1];
    let c_scale = c.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if infeasibility > PHASE_ONE_TOL * c_scale {
        return Ok(DualOutcome::Infeasible);
    }

    // Drive artificials out of the basis where a structural column allows it.
    for i in 0..d {
        if tab.basis[i] >= m {
            let col = (0..m)
                .filter(|&j| tab.at(i, j).abs() > 1e-9)
                .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            if let Some(col) = col {
                tab.pivot(i, col);
            }
        }
    }

    // Phase two with the true costs (artificials cost zero and never enter).
    let cost = |j: usize| if j < m { rows[j].1 } else { 0.0 };
    for j in 0..width - 1 {
        tab.objective[j] = cost(j)
            - (0..d)
                .map(|i| cost(tab.basis[i]) * tab.at(i, j))
                .sum::<f64>();
    }
    tab.objective[width - 1] = -(0..d).map(|i| cost(tab.basis[i]) * tab.rhs(i)).sum::<f64>();
    for i in 0..d {
        tab.objective[tab.basis[i]] = 0.0;
    }
    if !tab.optimize()? {
        return Ok(DualOutcome::Unbounded);
    }

    // Reduced cost of artificial k is -π'_k; undo the row sign flips.
    let point = (0..d).map(|k| -tab.objective[m + k] * signs[k]).collect();
    Ok(DualOutcome::Optimal(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(c: &[f64], rows: &[(Vec<f64>, f64)]) -> LpResult {
        let refs: Vec<RowRef<'_>> = rows.iter().map(|(n, o)| (n.as_slice(), *o)).collect();
        maximize(c, &refs, 1e-8).unwrap()
    }

    #[test]
    fn single_bound() {
        let r = solve(&[1.0], &[(vec![1.0], 3.0)]);
        assert_eq!(r.status(), LpStatus::Optimal);
        assert!((r.value().unwrap() - 3.0).abs() < 1e-12);
        assert!((r.optimizer().unwrap()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let r = solve(&[1.0], &[(vec![1.0], 0.0), (vec![-1.0], -1.0)]);
        assert_eq!(r, LpResult::Infeasible);
    }

    #[test]
    fn open_ray_is_unbounded() {
        assert_eq!(solve(&[1.0], &[(vec![-1.0], 0.0)]), LpResult::Unbounded);
    }

    #[test]
    fn zero_objective_returns_feasible_point() {
        let rows = vec![
            (vec![1.0, 0.0], -2.0),
            (vec![-1.0, 0.0], 3.0),
            (vec![0.0, 1.0], 7.0),
            (vec![0.0, -1.0], -6.5),
        ];
        let r = solve(&[0.0, 0.0], &rows);
        let z = r.optimizer().unwrap();
        for (n, o) in &rows {
            assert!(n[0] * z[0] + n[1] * z[1] <= o + 1e-9);
        }
    }

    #[test]
    fn degenerate_vertex() {
        // Many rows through the optimum (1, 1).
        let mut rows = vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 1.0)];
        for k in 1..20 {
            let t = k as f64 / 20.0;
            rows.push((vec![t, 1.0 - t], 1.0));
        }
        let r = solve(&[1.0, 1.0], &rows);
        assert!((r.value().unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lineality_direction_with_orthogonal_objective() {
        // r is unconstrained but the objective ignores it.
        let rows = vec![(vec![1.0, 0.0], 2.0), (vec![-1.0, 0.0], 1.0)];
        let r = solve(&[1.0, 0.0], &rows);
        assert!((r.value().unwrap() - 2.0).abs() < 1e-12);
        let r = solve(&[0.0, 1.0], &rows);
        assert_eq!(r, LpResult::Unbounded);
    }

    #[test]
    fn no_rows() {
        assert_eq!(solve(&[1.0, 0.0], &[]), LpResult::Unbounded);
        assert_eq!(solve(&[0.0, 0.0], &[]).value(), Some(0.0));
    }
}
