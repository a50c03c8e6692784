//! H-representation polyhedra and the LP-backed operations on them.

mod lp;
mod vertices;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegionKind;

pub(crate) use lp::RowRef;
pub use lp::{LpResult, LpStatus};
pub use vertices::{polygon_area, vertices_2d};

/// Numerical tolerances shared by every set operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Constraint feasibility slack.
    pub feas: f64,
    /// Slack added to `[h]_ℓ` when certifying a row redundant.
    pub redundancy: f64,
    /// Vertex merging distance.
    pub geom: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-8,
            redundancy: 1e-9,
            geom: 1e-7,
        }
    }
}

/// The set `{z | Hz ≤ h}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    normals: Vec<f64>,
    offsets: Vec<f64>,
}

impl Polyhedron {
    /// Builds a polyhedron from explicit rows. Rejects ragged input,
    /// non-finite entries and zero normals.
    pub fn new(dim: usize, normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid(
                "polyhedron dimension must be positive".into(),
            ));
        }
        if normals.len() != offsets.len() {
            return Err(Error::Invalid(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let mut poly = Polyhedron::universe(dim);
        for (i, (normal, offset)) in normals.into_iter().zip(offsets).enumerate() {
            if normal.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: normal.len(),
                });
            }
            if !offset.is_finite() || normal.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("row {i} has non-finite entries")));
            }
            if normal.iter().all(|&v| v == 0.0) {
                return Err(Error::Invalid(format!("row {i} has a zero normal")));
            }
            poly.normals.extend_from_slice(&normal);
            poly.offsets.push(offset);
        }
        Ok(poly)
    }

    /// The whole space `R^dim` (no rows).
    pub fn universe(dim: usize) -> Self {
        Polyhedron {
            dim,
            normals: Vec::new(),
            offsets: Vec::new(),
        }
    }

    pub fn from_matrix(
        h_mat: &nalgebra::DMatrix<f64>,
        h_vec: &nalgebra::DVector<f64>,
    ) -> Result<Self> {
        let rows = (0..h_mat.nrows())
            .map(|i| h_mat.row(i).iter().cloned().collect())
            .collect();
        Polyhedron::new(h_mat.ncols(), rows, h_vec.iter().cloned().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_universe(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.normals
            .chunks(self.dim)
            .zip(self.offsets.iter().cloned())
    }

    pub(crate) fn row_refs(&self) -> impl Iterator<Item = RowRef<'_>> + '_ {
        self.rows()
    }

    pub fn normals_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n_rows(), self.dim, &self.normals)
    }

    pub fn offsets_vector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.offsets)
    }

    /// Appends `normal · z ≤ offset` scaled to a unit normal.
    ///
    /// A (numerically) zero normal is vacuous when `offset ≥ 0` and is
    /// dropped; otherwise the set is empty and a contradictory pair of rows
    /// is stored instead.
    pub(crate) fn push_normalized(&mut self, normal: &[f64], offset: f64) {
        debug_assert_eq!(normal.len(), self.dim);
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * offset.abs().max(1.0) {
            if offset < 0.0 {
                let mut e = vec![0.0; self.dim];
                e[0] = 1.0;
                self.normals.extend_from_slice(&e);
                self.offsets.push(-1.0);
                e[0] = -1.0;
                self.normals.extend_from_slice(&e);
                self.offsets.push(-1.0);
            }
            return;
        }
        self.normals.extend(normal.iter().map(|v| v / norm));
        self.offsets.push(offset / norm);
    }

    /// Rows scaled to unit normals; the set is unchanged.
    pub fn normalized(&self) -> Polyhedron {
        let mut out = Polyhedron::universe(self.dim);
        for (normal, offset) in self.rows() {
            out.push_normalized(normal, offset);
        }
        out
    }

    /// The rows with the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Polyhedron {
        let mut out = Polyhedron::universe(self.dim);
        for &i in indices {
            out.normals.extend_from_slice(self.row(i));
            out.offsets.push(self.offsets[i]);
        }
        out
    }

    /// Row-wise concatenation: the set intersection.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.normals.extend_from_slice(&other.normals);
        out.offsets.extend_from_slice(&other.offsets);
        Ok(out)
    }

    /// The tightened set `{z | Hz ≤ (1 - eps) h}`. Requires every offset to be
    /// strictly positive so the origin is interior.
    pub fn tighten(&self, eps: f64) -> Result<Polyhedron> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Precondition(format!(
                "tightening factor {eps} outside [0, 1)"
            )));
        }
        if let Some(i) = self.offsets.iter().position(|&o| o <= 0.0) {
            return Err(Error::Precondition(format!(
                "row {i} has nonpositive offset {}; the origin is not interior",
                self.offsets[i]
            )));
        }
        let mut out = self.clone();
        out.offsets.iter_mut().for_each(|o| *o *= 1.0 - eps);
        Ok(out)
    }

    /// Largest row residual `[H]_ℓ z - [h]_ℓ` (negative inside).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dim, "point dimension mismatch");
        self.rows()
            .map(|(normal, offset)| dot(normal, z) - offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Hz ≤ h + tol` element-wise.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        assert_eq!(z.len(), self.dim, "point dimension mismatch");
        self.rows()
            .all(|(normal, offset)| dot(normal, z) <= offset + tol)
    }

    /// Maximizes `c · z` over the set.
    pub fn maximize(&self, c: &[f64], tol: &Tolerances) -> Result<LpResult> {
        lp_solve(c, self, tol)
    }

    pub fn is_empty(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.maximize(&vec![0.0; self.dim], tol)?.status() == LpStatus::Infeasible)
    }

    /// The slice obtained by fixing the last coordinate to `value`.
    pub fn cross_section(&self, value: f64) -> Polyhedron {
        let d = self.dim - 1;
        let mut out = Polyhedron::universe(d);
        for (normal, offset) in self.rows() {
            let (head, last) = normal.split_at(d);
            let reduced = offset - last[0] * value;
            if head.iter().all(|&v| v == 0.0) {
                if reduced < 0.0 {
                    out.push_normalized(head, reduced);
                }
                continue;
            }
            out.normals.extend_from_slice(head);
            out.offsets.push(reduced);
        }
        out
    }

    /// Per-coordinate LP bounds. `Ok(None)` for an empty set,
    /// `Err(Unbounded)` if any coordinate is unbounded.
    pub fn bounding_box(&self, tol: &Tolerances) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for i in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; self.dim];
                c[i] = sign;
                match self.maximize(&c, tol)? {
                    LpResult::Infeasible => return Ok(None),
                    LpResult::Unbounded => return Err(Error::Unbounded),
                    LpResult::Optimal { value, .. } => {
                        if sign > 0.0 {
                            hi[i] = value;
                        } else {
                            lo[i] = -value;
                        }
                    }
                }
            }
        }
        Ok(Some((lo, hi)))
    }
}

#[derive(Serialize, Deserialize)]
struct PolyhedronJson {
    #[serde(rename = "H")]
    normals: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl Serialize for Polyhedron {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        PolyhedronJson {
            normals: self.rows().map(|(n, _)| n.to_vec()).collect(),
            offsets: self.offsets.clone(),
            dim: self.is_universe().then_some(self.dim),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polyhedron {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = PolyhedronJson::deserialize(deserializer)?;
        let dim = match (raw.dim, raw.normals.first()) {
            (_, Some(first)) => first.len(),
            (Some(d), None) => d,
            (None, None) => {
                return Err(serde::de::Error::custom(
                    "polyhedron with no rows needs a \"dim\" field",
                ))
            }
        };
        Polyhedron::new(dim, raw.normals, raw.offsets).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `cᵀz` subject to `Hz ≤ h`.
pub fn lp_solve(c: &[f64], poly: &Polyhedron, tol: &Tolerances) -> Result<LpResult> {
    if c.len() != poly.dim {
        return Err(Error::Dimension {
            expected: poly.dim,
            found: c.len(),
        });
    }
    let rows: Vec<RowRef<'_>> = poly.row_refs().collect();
    lp::maximize(c, &rows, tol.feas)
}

/// Maximizes `c · z` over the union of several row lists.
pub(crate) fn lp_solve_rows(c: &[f64], rows: &[RowRef<'_>], tol: &Tolerances) -> Result<LpResult> {
    lp::maximize(c, rows, tol.feas)
}

/// Whether the row `(normal, offset)` can be dropped given the LP outcome of
/// maximizing `normal` over the remaining constraints.
pub(crate) fn certifies_redundant(outcome: &LpResult, offset: f64, tol: &Tolerances) -> bool {
    match outcome {
        LpResult::Infeasible => true,
        LpResult::Unbounded => false,
        LpResult::Optimal { value, .. } => *value <= offset + tol.redundancy,
    }
}

/// Indices of the rows of `generation` that survive sequential redundancy
/// elimination against `context` and the rows of `generation` kept so far.
pub fn nonredundant_rows(
    generation: &Polyhedron,
    context: &Polyhedron,
    tol: &Tolerances,
) -> Result<Vec<usize>> {
    if generation.dim != context.dim {
        return Err(Error::Dimension {
            expected: context.dim,
            found: generation.dim,
        });
    }
    let m = generation.n_rows();
    let mut keep = vec![true; m];
    let mut rows: Vec<RowRef<'_>> = Vec::with_capacity(context.n_rows() + m);
    for l in 0..m {
        rows.clear();
        rows.extend(context.row_refs());
        rows.extend(
            (0..m)
                .filter(|&j| j != l && keep[j])
                .map(|j| (generation.row(j), generation.offset(j))),
        );
        let outcome = lp_solve_rows(generation.row(l), &rows, tol)?;
        if certifies_redundant(&outcome, generation.offset(l), tol) {
            keep[l] = false;
        }
    }
    Ok((0..m).filter(|&i| keep[i]).collect())
}

/// Drops every row of `generation` that is implied by `context` together
/// with the other retained rows. The intersection with `context` is
/// unchanged.
pub fn remove_redundant_rows(
    generation: &Polyhedron,
    context: &Polyhedron,
    tol: &Tolerances,
) -> Result<Polyhedron> {
    let keep = nonredundant_rows(generation, context, tol)?;
    Ok(generation.select(&keep))
}

/// Ordered generations `(H_k, h_k)` accumulated by a propagation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintBundle {
    origin: RegionKind,
    dim: usize,
    generations: Vec<Polyhedron>,
}

impl ConstraintBundle {
    pub fn new(dim: usize, origin: RegionKind) -> Self {
        ConstraintBundle {
            origin,
            dim,
            generations: Vec::new(),
        }
    }

    /// A bundle holding a single generation.
    pub fn seed(generation: Polyhedron, origin: RegionKind) -> Self {
        let mut bundle = ConstraintBundle::new(generation.dim(), origin);
        bundle.push(generation);
        bundle
    }

    pub fn origin(&self) -> RegionKind {
        self.origin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn push(&mut self, generation: Polyhedron) {
        assert_eq!(generation.dim(), self.dim, "generation dimension mismatch");
        self.generations.push(generation);
    }

    /// Appends every generation of `other`.
    pub fn extend(&mut self, other: &ConstraintBundle) {
        for g in &other.generations {
            self.push(g.clone());
        }
    }

    pub fn generations(&self) -> &[Polyhedron] {
        &self.generations
    }

    pub fn n_rows(&self) -> usize {
        self.generations.iter().map(Polyhedron::n_rows).sum()
    }

    pub fn has_rows(&self) -> bool {
        self.n_rows() > 0
    }

    /// All generations stacked into one constraint list.
    pub fn flatten(&self) -> Polyhedron {
        let mut out = Polyhedron::universe(self.dim);
        for g in &self.generations {
            out.normals.extend_from_slice(&g.normals);
            out.offsets.extend_from_slice(&g.offsets);
        }
        out
    }
}
