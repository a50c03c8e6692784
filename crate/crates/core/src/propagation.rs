//! Constraint propagation inside one saturation region.
//!
//! Each generation of rows is pulled back one step through the region's
//! affine dynamics `z⁺ = Nz + w`: a row `a·z ≤ b` becomes `aN·z ≤ b - a·w`.
//! New generations are row-reduced against the region and every earlier
//! generation; the loop stops when a generation reduces to nothing.

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    certifies_redundant, lp_solve_rows, remove_redundant_rows, ConstraintBundle, Polyhedron,
    RowRef, Tolerances,
};
use crate::model::{Plant, RegionKind, SaturatedLoop};

/// Iteration and size limits. Exceeding any of them is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Inner propagation steps per region.
    pub k_max: usize,
    /// Outer constraint-sharing rounds.
    pub i_max: usize,
    /// Rows in a single generation.
    pub row_cap: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            k_max: 500,
            i_max: 100,
            row_cap: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub tolerances: Tolerances,
    pub caps: Caps,
    /// Run the k = 1 two-step filter in saturated regions.
    pub empty_set_prevention: bool,
    /// Keep the retained generations in [`PropagationResult::trace`].
    pub record_trace: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            tolerances: Tolerances::default(),
            caps: Caps::default(),
            empty_set_prevention: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// Region intersected with every retained generation.
    pub q: Polyhedron,
    /// Retained generations, excluding the region's own rows.
    pub bundle: ConstraintBundle,
    /// Step index at which a generation came back empty.
    pub steps: usize,
    /// Rows of the k = 1 generation removed by empty-set prevention.
    pub prevention_dropped: usize,
    /// Retained generation per step (only with `record_trace`).
    pub trace: Vec<Polyhedron>,
}

/// Undesirable saturated equilibrium and the row that excludes it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlAuthority {
    pub applicable: bool,
    /// `(I - A)⁻¹ B u` for the saturated input, when `I - A` is invertible.
    pub x_bar: Option<Vec<f64>>,
    /// `1 + K (I - A)⁻¹ B`.
    pub condition_value: Option<f64>,
    /// Extra seed row over `z = (x, r)`, present iff applicable.
    pub row: Option<(Vec<f64>, f64)>,
}

impl ControlAuthority {
    fn inapplicable() -> Self {
        ControlAuthority {
            applicable: false,
            x_bar: None,
            condition_value: None,
            row: None,
        }
    }
}

/// Upper and lower control-authority data.
pub fn control_authority(
    plant: &Plant,
    k: &DVector<f64>,
    u_lo: f64,
    u_hi: f64,
    eps: f64,
) -> (ControlAuthority, ControlAuthority) {
    let n = plant.n();
    let i_minus_a = DMatrix::identity(n, n) - &plant.a;
    let det = i_minus_a.determinant();
    let scale = i_minus_a.amax().max(1.0).powi(n as i32);
    let inv = match i_minus_a.try_inverse() {
        Some(inv) if det.abs() > 1e-12 * scale => inv,
        _ => {
            return (
                ControlAuthority::inapplicable(),
                ControlAuthority::inapplicable(),
            )
        }
    };
    let ib = &inv * &plant.b;
    let condition = 1.0 + k.dot(&ib);
    let applicable = condition <= 0.0;
    let build = |u: f64, sign: f64| {
        let x_bar = &ib * u;
        let row = applicable.then(|| {
            let mut normal: Vec<f64> = k.iter().map(|v| -sign * v).collect();
            normal.push(0.0);
            (normal, -sign * (1.0 - eps / 2.0) * k.dot(&x_bar))
        });
        ControlAuthority {
            applicable,
            x_bar: Some(x_bar.iter().cloned().collect()),
            condition_value: Some(condition),
            row,
        }
    };
    (build(u_hi, 1.0), build(u_lo, -1.0))
}

/// Output constraints under the unsaturated law: `H[Ĉ D̂] z ≤ h`.
pub fn nonsat_seed(lp: &SaturatedLoop) -> Polyhedron {
    let cl = lp.closed_loop();
    let out = lp.outputs();
    let n = lp.n();
    let mut cd = DMatrix::zeros(cl.c_hat.nrows(), n + 1);
    cd.view_mut((0, 0), (cl.c_hat.nrows(), n))
        .copy_from(&cl.c_hat);
    cd.view_mut((0, n), (cl.d_hat.len(), 1))
        .copy_from(&cl.d_hat);
    let rows = &out.h_mat * cd;
    let mut seed = Polyhedron::universe(n + 1);
    for i in 0..rows.nrows() {
        let normal: Vec<f64> = rows.row(i).iter().cloned().collect();
        seed.push_normalized(&normal, out.h_vec[i]);
    }
    seed
}

/// Output constraints with the input clamped at `u`, plus the authority row
/// for that side when it applies.
pub fn sat_seed(lp: &SaturatedLoop, side: RegionKind) -> Polyhedron {
    let (u, auth) = saturated_side(lp, side);
    let plant = lp.plant();
    let out = lp.outputs();
    let n = lp.n();
    let hc = &out.h_mat * &plant.c;
    let hd = &out.h_mat * &plant.d;
    let mut seed = Polyhedron::universe(n + 1);
    for i in 0..hc.nrows() {
        let mut normal: Vec<f64> = hc.row(i).iter().cloned().collect();
        normal.push(0.0);
        seed.push_normalized(&normal, out.h_vec[i] - hd[i] * u);
    }
    if let Some((normal, offset)) = auth.row {
        seed.push_normalized(&normal, offset);
    }
    seed
}

fn saturated_side(lp: &SaturatedLoop, side: RegionKind) -> (f64, ControlAuthority) {
    let (upper, lower) = control_authority(lp.plant(), lp.gain(), lp.u_lo(), lp.u_hi(), lp.eps());
    match side {
        RegionKind::UpperSaturated => (lp.u_hi(), upper),
        RegionKind::LowerSaturated => (lp.u_lo(), lower),
        RegionKind::NonSaturated => panic!("not a saturated region"),
    }
}

/// Affine region dynamics `z⁺ = Nz + w`.
struct Dynamics {
    n: DMatrix<f64>,
    w: DVector<f64>,
}

impl Dynamics {
    /// Row `(a, b)` pulled back one step, unnormalized.
    fn pull_back(&self, a: &[f64], b: f64) -> (Vec<f64>, f64) {
        let d = a.len();
        let normal: Vec<f64> = (0..d)
            .map(|j| (0..d).map(|i| a[i] * self.n[(i, j)]).sum())
            .collect();
        let shift: f64 = a.iter().zip(self.w.iter()).map(|(x, y)| x * y).sum();
        (normal, b - shift)
    }

    fn advance(&self, generation: &Polyhedron) -> Polyhedron {
        let mut next = Polyhedron::universe(generation.dim());
        for (a, b) in generation.rows() {
            let (normal, offset) = self.pull_back(a, b);
            next.push_normalized(&normal, offset);
        }
        next
    }
}

/// Algorithm for the non-saturated region: dynamics `[Â B̂; 0 1]`.
pub fn propagate_nonsat(
    lp: &SaturatedLoop,
    region: &Polyhedron,
    seed: &ConstraintBundle,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    let dynamics = Dynamics {
        n: lp.nonsat_dynamics(),
        w: DVector::zeros(lp.dim()),
    };
    propagate(
        &dynamics,
        region,
        seed,
        false,
        RegionKind::NonSaturated,
        cfg,
    )
}

/// Upper-saturated region: dynamics `[A 0; 0 1]` plus `[Bū; 0]`.
pub fn propagate_upper(
    lp: &SaturatedLoop,
    region: &Polyhedron,
    seed: &ConstraintBundle,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    propagate_saturated(lp, RegionKind::UpperSaturated, region, seed, cfg)
}

/// Lower-saturated region: as the upper one with `u̲` in place of `ū`.
pub fn propagate_lower(
    lp: &SaturatedLoop,
    region: &Polyhedron,
    seed: &ConstraintBundle,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    propagate_saturated(lp, RegionKind::LowerSaturated, region, seed, cfg)
}

pub fn propagate_saturated(
    lp: &SaturatedLoop,
    side: RegionKind,
    region: &Polyhedron,
    seed: &ConstraintBundle,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    let u = match side {
        RegionKind::UpperSaturated => lp.u_hi(),
        RegionKind::LowerSaturated => lp.u_lo(),
        RegionKind::NonSaturated => return propagate_nonsat(lp, region, seed, cfg),
    };
    let dynamics = Dynamics {
        n: lp.sat_dynamics(),
        w: lp.sat_offset(u),
    };
    propagate(&dynamics, region, seed, cfg.empty_set_prevention, side, cfg)
}

fn propagate(
    dynamics: &Dynamics,
    region: &Polyhedron,
    seed: &ConstraintBundle,
    prevention: bool,
    origin: RegionKind,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    let tol = &cfg.tolerances;
    if seed.dim() != region.dim() {
        return Err(Error::Dimension {
            expected: region.dim(),
            found: seed.dim(),
        });
    }
    let mut bundle = ConstraintBundle::new(region.dim(), origin);
    let mut trace = Vec::new();
    // The seed is pulled back in full; only its reduced form is stored. Seed
    // rows implied by the region still matter one step later, for successors
    // that leave the region.
    let mut generation = seed.flatten().normalized();
    let mut reduced_seed = Some(remove_redundant_rows(&generation, region, tol)?);
    let mut accumulated = region.clone();
    let mut prevention_dropped = 0;
    let mut k = 0;
    while generation.n_rows() > 0 {
        if generation.n_rows() > cfg.caps.row_cap {
            return Err(Error::CapExceeded {
                what: "generation rows",
                cap: cfg.caps.row_cap,
                hint: format!("{origin:?} generation {k} has {} rows", generation.n_rows()),
            });
        }
        let mut next = dynamics.advance(&generation);
        if prevention && k == 1 {
            let first = &bundle.generations()[0];
            let keep = empty_set_prevention(dynamics, &generation, first, region, tol)?;
            prevention_dropped = generation.n_rows() - keep.len();
            debug!(
                "{origin:?}: empty-set prevention dropped {prevention_dropped} of {} rows",
                generation.n_rows()
            );
            if prevention_dropped > 0 {
                generation = generation.select(&keep);
                next = dynamics.advance(&generation);
            }
        }
        if let Some(reduced) = reduced_seed.take() {
            generation = reduced;
        }
        accumulated = accumulated.intersect(&generation)?;
        let next = remove_redundant_rows(&next, &accumulated, tol)?;
        trace!(
            "{origin:?} k={k}: kept {} rows, next has {}",
            generation.n_rows(),
            next.n_rows()
        );
        if cfg.record_trace {
            trace.push(generation.clone());
        }
        bundle.push(generation);
        generation = next;
        k += 1;
        if k > cfg.caps.k_max {
            return Err(Error::CapExceeded {
                what: "propagation steps",
                cap: cfg.caps.k_max,
                hint: format!("{origin:?} propagation did not terminate; the set may not be finitely determined"),
            });
        }
    }
    Ok(PropagationResult {
        q: accumulated,
        bundle,
        steps: k,
        prevention_dropped,
        trace,
    })
}

/// Indices of `gen1` rows that survive the two-step test: row ℓ is dropped
/// when, within the region and the seed generation, satisfying its own
/// successor row already implies it.
fn empty_set_prevention(
    dynamics: &Dynamics,
    gen1: &Polyhedron,
    gen0: &Polyhedron,
    region: &Polyhedron,
    tol: &Tolerances,
) -> Result<Vec<usize>> {
    let mut keep = Vec::with_capacity(gen1.n_rows());
    let context: Vec<RowRef<'_>> = region.row_refs().chain(gen0.row_refs()).collect();
    for l in 0..gen1.n_rows() {
        let (normal, offset) = dynamics.pull_back(gen1.row(l), gen1.offset(l));
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut rows = context.clone();
        if norm <= 1e-12 * offset.abs().max(1.0) {
            if offset < 0.0 {
                continue;
            }
        } else {
            rows.push((&normal, offset));
        }
        let outcome = lp_solve_rows(gen1.row(l), &rows, tol)?;
        if !certifies_redundant(&outcome, gen1.offset(l), tol) {
            keep.push(l);
        }
    }
    Ok(keep)
}

/// Runs the filter on explicit generations; exposed for tests and examples.
/// Returns the retained rows of `gen1`.
pub fn apply_empty_set_prevention(
    lp: &SaturatedLoop,
    side: RegionKind,
    gen1: &Polyhedron,
    gen0: &Polyhedron,
    region: &Polyhedron,
    tol: &Tolerances,
) -> Result<Polyhedron> {
    let u = match side {
        RegionKind::UpperSaturated => lp.u_hi(),
        RegionKind::LowerSaturated => lp.u_lo(),
        RegionKind::NonSaturated => {
            return Err(Error::Invalid(
                "prevention applies to saturated regions".into(),
            ))
        }
    };
    let dynamics = Dynamics {
        n: lp.sat_dynamics(),
        w: lp.sat_offset(u),
    };
    let keep = empty_set_prevention(&dynamics, gen1, gen0, region, tol)?;
    Ok(gen1.select(&keep))
}

/// One pull-back step of every row through the region dynamics.
pub fn advance_generation(
    lp: &SaturatedLoop,
    side: RegionKind,
    generation: &Polyhedron,
) -> Polyhedron {
    let dynamics = match side {
        RegionKind::NonSaturated => Dynamics {
            n: lp.nonsat_dynamics(),
            w: DVector::zeros(lp.dim()),
        },
        RegionKind::UpperSaturated => Dynamics {
            n: lp.sat_dynamics(),
            w: lp.sat_offset(lp.u_hi()),
        },
        RegionKind::LowerSaturated => Dynamics {
            n: lp.sat_dynamics(),
            w: lp.sat_offset(lp.u_lo()),
        },
    };
    dynamics.advance(generation)
}
