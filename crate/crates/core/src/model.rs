//! Plant, saturated prestabilizing loop, equilibrium manifold and the
//! partition of `(x, r)` space into saturation regions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polyhedron;
use crate::propagation::{control_authority, ControlAuthority};

/// Which saturation region a set or constraint bundle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    NonSaturated,
    UpperSaturated,
    LowerSaturated,
}

impl RegionKind {
    pub const ALL: [RegionKind; 3] = [
        RegionKind::NonSaturated,
        RegionKind::UpperSaturated,
        RegionKind::LowerSaturated,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RegionKind::NonSaturated => "Q",
            RegionKind::UpperSaturated => "Q_up",
            RegionKind::LowerSaturated => "Q_lo",
        }
    }
}

/// Single-input plant `x⁺ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl Plant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Invalid(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: b.len(),
            });
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Invalid(format!(
                "C must be l x {n}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if d.len() != c.nrows() {
            return Err(Error::Dimension {
                expected: c.nrows(),
                found: d.len(),
            });
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .chain(d.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid(
                "plant matrices contain non-finite entries".into(),
            ));
        }
        if b.iter().all(|&v| v == 0.0) {
            return Err(Error::Invalid("B must be nonzero".into()));
        }
        Ok(Plant { a, b, c, d })
    }

    /// Convenience constructor from nested row slices.
    pub fn from_rows(a: &[Vec<f64>], b: &[f64], c: &[Vec<f64>], d: &[f64]) -> Result<Self> {
        Plant::new(
            matrix(a)?,
            DVector::from_column_slice(b),
            matrix(c)?,
            DVector::from_column_slice(d),
        )
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn l(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.c * x + &self.d * u
    }
}

pub(crate) fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Output constraint set `Y = {y | Hy ≤ h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConstraints {
    pub h_mat: DMatrix<f64>,
    pub h_vec: DVector<f64>,
}

impl OutputConstraints {
    pub fn new(h_mat: DMatrix<f64>, h_vec: DVector<f64>) -> Result<Self> {
        if h_mat.nrows() != h_vec.len() || h_mat.nrows() == 0 {
            return Err(Error::Invalid(format!(
                "output constraints: H has {} rows, h has {} entries",
                h_mat.nrows(),
                h_vec.len()
            )));
        }
        if h_mat.iter().chain(h_vec.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "output constraints contain non-finite entries".into(),
            ));
        }
        Ok(OutputConstraints { h_mat, h_vec })
    }

    pub fn from_rows(h_mat: &[Vec<f64>], h_vec: &[f64]) -> Result<Self> {
        OutputConstraints::new(matrix(h_mat)?, DVector::from_column_slice(h_vec))
    }

    pub fn admits(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.violation(y) <= tol
    }

    /// Largest residual of `Hy - h`.
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        (&self.h_mat * y - &self.h_vec).max()
    }
}

/// Scaling convention for the equilibrium basis vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceNormalization {
    /// `G_u = 1` when nonzero, else the largest-magnitude entry of `G_x` is 1.
    #[default]
    Input,
    /// Unit Euclidean norm of `(G_x, G_u)`, sign chosen so `G_u ≥ 0`.
    Unit,
}

/// Equilibrium manifold `x = G_x r`, `u = G_u r`, `y = G_y r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumBasis {
    pub g_x: DVector<f64>,
    pub g_u: f64,
    pub g_y: DVector<f64>,
}

/// Dimension of `null([A - I  B])`.
pub fn null_space_dimension(plant: &Plant) -> usize {
    let (_, sv) = padded_svd(plant);
    let smax = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    sv.iter().filter(|&&s| s <= 1e-9 * smax).count()
}

fn padded_svd(plant: &Plant) -> (DMatrix<f64>, Vec<f64>) {
    let n = plant.n();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n))
        .copy_from(&(&plant.a - DMatrix::identity(n, n)));
    m.view_mut((0, n), (n, 1)).copy_from(&plant.b);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (v_t, svd.singular_values.iter().cloned().collect())
}

/// Basis of the one-dimensional equilibrium manifold.
pub fn equilibrium_basis(
    plant: &Plant,
    normalization: ReferenceNormalization,
) -> Result<EquilibriumBasis> {
    let n = plant.n();
    let dim = null_space_dimension(plant);
    if dim != 1 {
        return Err(Error::UnsupportedPlant(format!(
            "null space of [A - I, B] has dimension {dim}; a scalar reference needs exactly 1"
        )));
    }
    let (v_t, sv) = padded_svd(plant);
    let idx = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut g: Vec<f64> = v_t.row(idx).iter().cloned().collect();
    let g_u_raw = g[n];
    let scale = match normalization {
        ReferenceNormalization::Input => {
            if g_u_raw.abs() > 1e-9 {
                g_u_raw
            } else {
                let j = (0..n)
                    .max_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs()))
                    .unwrap();
                g[j]
            }
        }
        ReferenceNormalization::Unit => {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if g_u_raw < 0.0 {
                -norm
            } else {
                norm
            }
        }
    };
    g.iter_mut().for_each(|v| *v /= scale);
    if g[n].abs() <= 1e-12 {
        g[n] = 0.0;
    }
    // One refinement pass: re-solve for G_x with G_u fixed when I - A is invertible.
    let mut g_x = DVector::from_column_slice(&g[..n]);
    let g_u = g[n];
    if g_u != 0.0 {
        if let Some(inv) = (DMatrix::identity(n, n) - &plant.a).try_inverse() {
            g_x = inv * &plant.b * g_u;
        }
    }
    let g_y = &plant.c * &g_x + &plant.d * g_u;
    Ok(EquilibriumBasis { g_x, g_u, g_y })
}

/// `(A - I) G_x + B G_u` in the infinity norm.
pub fn equilibrium_residual(plant: &Plant, basis: &EquilibriumBasis) -> f64 {
    let n = plant.n();
    ((&plant.a - DMatrix::identity(n, n)) * &basis.g_x + &plant.b * basis.g_u).amax()
}

/// Closed-loop matrices of the non-saturated dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DVector<f64>,
    pub c_hat: DMatrix<f64>,
    pub d_hat: DVector<f64>,
}

fn closed_loop_matrices(plant: &Plant, k: &DVector<f64>, basis: &EquilibriumBasis) -> ClosedLoop {
    let feed = basis.g_u + k.dot(&basis.g_x);
    ClosedLoop {
        a_hat: &plant.a - &plant.b * k.transpose(),
        b_hat: &plant.b * feed,
        c_hat: &plant.c - &plant.d * k.transpose(),
        d_hat: &plant.d * feed,
    }
}

/// The matrices `Â, B̂, Ĉ, D̂`. Fails when `Â` is not Schur.
pub fn closed_loop(
    plant: &Plant,
    k: &DVector<f64>,
    basis: &EquilibriumBasis,
) -> Result<ClosedLoop> {
    if k.len() != plant.n() {
        return Err(Error::Dimension {
            expected: plant.n(),
            found: k.len(),
        });
    }
    let cl = closed_loop_matrices(plant, k, basis);
    let rho = spectral_radius(&cl.a_hat);
    if rho >= 1.0 {
        return Err(Error::Configuration(format!(
            "A - BK has spectral radius {rho:.6}; the gain does not stabilize the plant"
        )));
    }
    Ok(cl)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `{r | G_u r ≤ ū, -G_u r ≤ -u̲, H G_y r ≤ h}` with vacuous rows pruned.
pub fn reference_set(
    basis: &EquilibriumBasis,
    u_lo: f64,
    u_hi: f64,
    outputs: &OutputConstraints,
) -> Result<Polyhedron> {
    let hg = &outputs.h_mat * &basis.g_y;
    let coeffs: Vec<(f64, f64)> = [(basis.g_u, u_hi), (-basis.g_u, -u_lo)]
        .into_iter()
        .chain(hg.iter().cloned().zip(outputs.h_vec.iter().cloned()))
        .collect();
    let scale = coeffs
        .iter()
        .fold(0.0_f64, |m, (a, _)| m.max(a.abs()))
        .max(1.0);
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for (a, b) in coeffs {
        if a.abs() <= 1e-12 * scale {
            if b <= 0.0 {
                return Err(Error::Configuration(format!(
                    "steady-state constraint 0 <= {b} is violated; no admissible equilibrium"
                )));
            }
            continue;
        }
        normals.push(vec![a]);
        offsets.push(b);
    }
    if normals.is_empty() {
        return Err(Error::Configuration("reference set is unbounded".into()));
    }
    Polyhedron::new(1, normals, offsets)
}

/// Plant plus saturated gain, bounds and every derived quantity.
#[derive(Debug, Clone)]
pub struct SaturatedLoop {
    plant: Plant,
    outputs: OutputConstraints,
    k: DVector<f64>,
    u_lo: f64,
    u_hi: f64,
    eps: f64,
    basis: EquilibriumBasis,
    cl: ClosedLoop,
    reference: Polyhedron,
    normalization: ReferenceNormalization,
}

impl SaturatedLoop {
    /// Derives the equilibrium basis, closed loop and reference set. Stability
    /// and interiority are checked by [`SaturatedLoop::ensure_valid`].
    pub fn new(
        plant: Plant,
        outputs: OutputConstraints,
        k: DVector<f64>,
        u_lo: f64,
        u_hi: f64,
        eps: f64,
        normalization: ReferenceNormalization,
    ) -> Result<Self> {
        if k.len() != plant.n() {
            return Err(Error::Dimension {
                expected: plant.n(),
                found: k.len(),
            });
        }
        if outputs.h_mat.ncols() != plant.l() {
            return Err(Error::Dimension {
                expected: plant.l(),
                found: outputs.h_mat.ncols(),
            });
        }
        if !u_lo.is_finite() || !u_hi.is_finite() || u_lo >= u_hi {
            return Err(Error::Invalid(format!(
                "need u_min < u_max, got [{u_lo}, {u_hi}]"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Invalid(format!(
                "epsilon must lie in (0, 1), got {eps}"
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("gain K has non-finite entries".into()));
        }
        let basis = equilibrium_basis(&plant, normalization)?;
        let cl = closed_loop_matrices(&plant, &k, &basis);
        let reference = reference_set(&basis, u_lo, u_hi, &outputs)?;
        Ok(SaturatedLoop {
            plant,
            outputs,
            k,
            u_lo,
            u_hi,
            eps,
            basis,
            cl,
            reference,
            normalization,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }
    pub fn outputs(&self) -> &OutputConstraints {
        &self.outputs
    }
    pub fn gain(&self) -> &DVector<f64> {
        &self.k
    }
    pub fn u_lo(&self) -> f64 {
        self.u_lo
    }
    pub fn u_hi(&self) -> f64 {
        self.u_hi
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn basis(&self) -> &EquilibriumBasis {
        &self.basis
    }
    pub fn closed_loop(&self) -> &ClosedLoop {
        &self.cl
    }
    pub fn normalization(&self) -> ReferenceNormalization {
        self.normalization
    }
    pub fn n(&self) -> usize {
        self.plant.n()
    }
    /// Ambient dimension of `z = (x, r)`.
    pub fn dim(&self) -> usize {
        self.plant.n() + 1
    }

    /// The untightened reference set `R`.
    pub fn reference_set(&self) -> &Polyhedron {
        &self.reference
    }

    /// `(1 - ε)R` as an interval `[r_min, r_max]`.
    pub fn reference_interval(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (a, b) in self.reference.rows() {
            let bound = (1.0 - self.eps) * b / a[0];
            if a[0] > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        (lo, hi)
    }

    /// Evenly spaced reference values spanning `(1 - ε)R`.
    pub fn reference_grid(&self, points: usize) -> Vec<f64> {
        let (lo, hi) = self.reference_interval();
        if points <= 1 {
            return vec![0.0];
        }
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    }

    /// The row `c` with `c·z = G_u r - K(x - G_x r)`.
    pub fn control_row(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.k.iter().map(|v| -v).collect();
        c.push(self.basis.g_u + self.k.dot(&self.basis.g_x));
        c
    }

    /// Unsaturated control value.
    pub fn control(&self, x: &DVector<f64>, r: f64) -> f64 {
        self.basis.g_u * r - self.k.dot(&(x - &self.basis.g_x * r))
    }

    pub fn saturated_control(&self, x: &DVector<f64>, r: f64) -> f64 {
        crate::oracle::saturate(self.control(x, r), self.u_lo, self.u_hi)
    }

    /// `(1 - ε)R` lifted to `z`-space.
    pub fn reference_band(&self) -> Polyhedron {
        let n = self.n();
        let mut band = Polyhedron::universe(n + 1);
        for (a, b) in self.reference.rows() {
            let mut row = vec![0.0; n + 1];
            row[n] = a[0];
            band.push_normalized(&row, (1.0 - self.eps) * b);
        }
        band
    }

    /// `[Â B̂; 0 1]`.
    pub fn nonsat_dynamics(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::identity(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.cl.a_hat);
        m.view_mut((0, n), (n, 1)).copy_from(&self.cl.b_hat);
        m
    }

    /// `[A 0; 0 1]`.
    pub fn sat_dynamics(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::identity(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.plant.a);
        m
    }

    /// Affine term `[B u; 0]` of the saturated dynamics.
    pub fn sat_offset(&self, u: f64) -> DVector<f64> {
        let n = self.n();
        let mut w = DVector::zeros(n + 1);
        w.rows_mut(0, n).copy_from(&(&self.plant.b * u));
        w
    }

    /// Output `ŷ(0|z)` under the saturated law.
    pub fn saturated_output(&self, z: &[f64]) -> DVector<f64> {
        let (x, r) = split(z);
        let u = self.saturated_control(&x, r);
        self.plant.output(&x, u)
    }

    /// One step of the saturated closed loop in `z`-space.
    pub fn saturated_step(&self, z: &[f64]) -> Vec<f64> {
        let (x, r) = split(z);
        let u = self.saturated_control(&x, r);
        let mut next: Vec<f64> = self.plant.step(&x, u).iter().cloned().collect();
        next.push(r);
        next
    }

    /// One step of the linear (non-saturated) closed loop.
    pub fn linear_step(&self, z: &[f64]) -> Vec<f64> {
        let zv = DVector::from_column_slice(z);
        (self.nonsat_dynamics() * zv).iter().cloned().collect()
    }

    /// Equilibrium point `(G_x r, r)`.
    pub fn equilibrium(&self, r: f64) -> Vec<f64> {
        let mut z: Vec<f64> = (&self.basis.g_x * r).iter().cloned().collect();
        z.push(r);
        z
    }

    /// Diagnostics for the standing assumptions.
    pub fn validate(&self) -> Diagnostics {
        validate(self)
    }

    /// Fails with the diagnostics attached unless `Â` is Schur and the origin
    /// is interior to both the input and output constraint sets.
    pub fn ensure_valid(&self) -> Result<Diagnostics> {
        let diag = self.validate();
        let reason = if !diag.schur {
            Some(format!(
                "A - BK is not Schur (spectral radius {:.6})",
                diag.spectral_radius
            ))
        } else if !diag.input_interior {
            Some("origin is not interior to the input bounds".to_string())
        } else if !diag.output_interior {
            Some("origin is not interior to the output constraint set".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Validation {
                reason,
                diagnostics: Box::new(diag),
            }),
            None => Ok(diag),
        }
    }
}

pub(crate) fn split(z: &[f64]) -> (DVector<f64>, f64) {
    let n = z.len() - 1;
    (DVector::from_column_slice(&z[..n]), z[n])
}

/// The three saturation regions in `z`-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionTriple {
    pub s: Polyhedron,
    pub s_up: Polyhedron,
    pub s_lo: Polyhedron,
}

impl RegionTriple {
    pub fn get(&self, kind: RegionKind) -> &Polyhedron {
        match kind {
            RegionKind::NonSaturated => &self.s,
            RegionKind::UpperSaturated => &self.s_up,
            RegionKind::LowerSaturated => &self.s_lo,
        }
    }
}

/// Non-saturated, upper- and lower-saturated regions, each intersected with
/// the tightened reference band.
pub fn build_regions(lp: &SaturatedLoop) -> RegionTriple {
    let c = lp.control_row();
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    let band = lp.reference_band();
    let mut s = Polyhedron::universe(lp.dim());
    s.push_normalized(&c, lp.u_hi);
    s.push_normalized(&neg, -lp.u_lo);
    let mut s_up = Polyhedron::universe(lp.dim());
    s_up.push_normalized(&neg, -lp.u_hi);
    let mut s_lo = Polyhedron::universe(lp.dim());
    s_lo.push_normalized(&c, lp.u_lo);
    let lift = |p: Polyhedron| p.intersect(&band).expect("same dimension");
    RegionTriple {
        s: lift(s),
        s_up: lift(s_up),
        s_lo: lift(s_lo),
    }
}

/// Report on the standing assumptions; never fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub schur: bool,
    pub spectral_radius: f64,
    pub input_interior: bool,
    pub output_interior: bool,
    pub null_space_dimension: usize,
    pub equilibrium_residual: f64,
    pub observability_rank: usize,
    pub state_dimension: usize,
    pub g_x: Vec<f64>,
    pub g_u: f64,
    pub g_y: Vec<f64>,
    pub reference_interval: (f64, f64),
    pub upper_authority: ControlAuthority,
    pub lower_authority: ControlAuthority,
}

impl Diagnostics {
    pub fn authority_row_applicable(&self) -> bool {
        self.upper_authority.applicable
    }
}

pub fn observability_rank(plant: &Plant) -> usize {
    let n = plant.n();
    let l = plant.l();
    let mut obs = DMatrix::zeros(n * l, n);
    let mut block = plant.c.clone();
    for i in 0..n {
        obs.view_mut((i * l, 0), (l, n)).copy_from(&block);
        block = &block * &plant.a;
    }
    obs.rank(1e-9 * obs.amax().max(1.0))
}

pub fn validate(lp: &SaturatedLoop) -> Diagnostics {
    let rho = spectral_radius(&lp.cl.a_hat);
    let (upper, lower) = control_authority(&lp.plant, &lp.k, lp.u_lo, lp.u_hi, lp.eps);
    Diagnostics {
        schur: rho < 1.0,
        spectral_radius: rho,
        input_interior: lp.u_lo < 0.0 && lp.u_hi > 0.0,
        output_interior: lp.outputs.h_vec.iter().all(|&h| h > 0.0),
        null_space_dimension: null_space_dimension(&lp.plant),
        equilibrium_residual: equilibrium_residual(&lp.plant, &lp.basis),
        observability_rank: observability_rank(&lp.plant),
        state_dimension: lp.n(),
        g_x: lp.basis.g_x.iter().cloned().collect(),
        g_u: lp.basis.g_u,
        g_y: lp.basis.g_y.iter().cloned().collect(),
        reference_interval: lp.reference_interval(),
        upper_authority: upper,
        lower_authority: lower,
    }
}
