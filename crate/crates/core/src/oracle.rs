//! Brute-force checks independent of the set computations: saturated
//! simulation, pointwise membership in the maximal saturated set, Monte
//! Carlo certification and an LQR gain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{vertices_2d, LpResult, Polyhedron, Tolerances};
use crate::isoas::{IsoasResult, MoasResult};
use crate::model::{spectral_radius, Plant, SaturatedLoop};

/// Clamp to `[u_lo, u_hi]`.
pub fn saturate(u: f64, u_lo: f64, u_hi: f64) -> f64 {
    if u > u_hi {
        u_hi
    } else if u < u_lo {
        u_lo
    } else {
        u
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// `length + 1` states starting at `x0`.
    pub states: Vec<Vec<f64>>,
    /// Saturated inputs, one per step.
    pub inputs: Vec<f64>,
    /// Outputs `y_k = C x_k + D u_k`, one per step.
    pub outputs: Vec<Vec<f64>>,
    /// Whether the unsaturated law was clipped at each step.
    pub saturated: Vec<bool>,
    pub r: f64,
    pub length: usize,
}

/// Rolls the saturated closed loop forward `steps` steps.
pub fn simulate(lp: &SaturatedLoop, x0: &[f64], r: f64, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Invalid(
            "simulation horizon must be at least 1".into(),
        ));
    }
    if x0.len() != lp.n() {
        return Err(Error::Dimension {
            expected: lp.n(),
            found: x0.len(),
        });
    }
    let plant = lp.plant();
    let mut x = DVector::from_column_slice(x0);
    let mut traj = Trajectory {
        states: vec![x0.to_vec()],
        inputs: Vec::with_capacity(steps),
        outputs: Vec::with_capacity(steps),
        saturated: Vec::with_capacity(steps),
        r,
        length: steps,
    };
    for _ in 0..steps {
        let raw = lp.control(&x, r);
        let u = saturate(raw, lp.u_lo(), lp.u_hi());
        traj.outputs
            .push(plant.output(&x, u).iter().cloned().collect());
        traj.inputs.push(u);
        traj.saturated.push(u != raw);
        x = plant.step(&x, u);
        traj.states.push(x.iter().cloned().collect());
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "step", rename_all = "snake_case")]
pub enum OmegaStatus {
    /// Entered the linear-loop admissible set at this step.
    Member(usize),
    /// Violated the output constraints at this step.
    NonMember(usize),
    Undecided,
}

/// Decides `z ∈ Ω∞` by simulation: an output violation disproves it,
/// entering the linear-loop admissible set proves it.
pub fn omega_membership(
    lp: &SaturatedLoop,
    moas: &MoasResult,
    z: &[f64],
    t_max: usize,
    tol: &Tolerances,
) -> OmegaStatus {
    assert_eq!(z.len(), lp.dim(), "point dimension mismatch");
    let mut z = z.to_vec();
    for k in 0..=t_max {
        if !lp.outputs().admits(&lp.saturated_output(&z), tol.feas) {
            return OmegaStatus::NonMember(k);
        }
        if moas.o.contains(&z, 0.0) {
            return OmegaStatus::Member(k);
        }
        z = lp.saturated_step(&z);
    }
    OmegaStatus::Undecided
}

/// LQR gain from the discrete Riccati equation by fixed-point iteration.
pub fn lqr_gain(plant: &Plant, q: &DMatrix<f64>, r: f64) -> Result<DVector<f64>> {
    let n = plant.n();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: q.nrows(),
        });
    }
    if r.is_nan() || r <= 0.0 {
        return Err(Error::Invalid(format!(
            "LQR input weight must be positive, got {r}"
        )));
    }
    let (a, b) = (&plant.a, &plant.b);
    let mut p = q.clone();
    const CAP: usize = 100_000;
    for it in 0..CAP {
        let next = riccati_map(a, b, q, r, &p);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RiccatiDivergence(it + 1));
        }
        let delta = (&next - &p).amax();
        p = next;
        if delta <= 1e-12 * p.amax().max(1.0) {
            let k = gain_from(a, b, r, &p);
            let rho = spectral_radius(&(a - b * k.transpose()));
            if rho >= 1.0 {
                return Err(Error::Configuration(format!(
                    "LQR gain leaves spectral radius {rho:.6}; (A, B) may not be stabilizable"
                )));
            }
            return Ok(k);
        }
    }
    Err(Error::RiccatiDivergence(CAP))
}

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    q: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pb = p * b;
    let s = r + b.dot(&pb);
    let atpb = a.transpose() * &pb;
    a.transpose() * p * a - &atpb * atpb.transpose() / s + q
}

fn gain_from(a: &DMatrix<f64>, b: &DVector<f64>, r: f64, p: &DMatrix<f64>) -> DVector<f64> {
    let pb = p * b;
    let s = r + b.dot(&pb);
    a.transpose() * pb / s
}

/// Stabilizing Riccati solution for `(Q, R)`, iterated as in [`lqr_gain`].
pub fn dare_solution(plant: &Plant, q: &DMatrix<f64>, r: f64) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    for it in 0..100_000 {
        let next = riccati_map(&plant.a, &plant.b, q, r, &p);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RiccatiDivergence(it + 1));
        }
        let delta = (&next - &p).amax();
        p = next;
        if delta <= 1e-12 * p.amax().max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::RiccatiDivergence(100_000))
}

/// `‖AᵀPA − P − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q‖∞`.
pub fn dare_residual(plant: &Plant, q: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> f64 {
    (riccati_map(&plant.a, &plant.b, q, r, p) - p).amax()
}

/// The set being certified.
#[derive(Debug, Clone, Copy)]
pub enum SetUnderTest<'a> {
    Isoas(&'a IsoasResult),
    Moas(&'a MoasResult),
}

impl SetUnderTest<'_> {
    fn parts(&self) -> Vec<&Polyhedron> {
        match self {
            SetUnderTest::Isoas(r) => r.sets().to_vec(),
            SetUnderTest::Moas(m) => vec![&m.o],
        }
    }

    /// Smallest row violation over the parts (≤ 0 means inside).
    fn margin(&self, z: &[f64]) -> f64 {
        self.parts()
            .iter()
            .map(|p| p.max_violation(z))
            .fold(f64::INFINITY, f64::min)
    }

    fn label(&self) -> &'static str {
        match self {
            SetUnderTest::Isoas(_) => "isoas",
            SetUnderTest::Moas(_) => "moas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Simulation cap for [`omega_membership`].
    pub t_max: usize,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 10_000,
            horizon: 500,
            seed: 0,
            t_max: 1000,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub set: &'static str,
    pub seed: u64,
    pub samples_requested: usize,
    pub samples: usize,
    pub attempts: usize,
    pub horizon: usize,
    pub t_max: usize,
    pub sampling_failed: bool,
    pub output_violations: usize,
    pub invariance_violations: usize,
    pub horizon_violations: usize,
    pub omega_member: usize,
    pub omega_nonmember: usize,
    pub omega_undecided: usize,
    pub saturation_events: usize,
    /// Largest `Hy - h` over the initial outputs (negative is safe).
    pub worst_output_margin: f64,
    /// Largest distance-to-set proxy of a successor (≤ τ_feas is inside).
    pub worst_invariance_margin: f64,
    pub worst_horizon_margin: f64,
    pub violating_samples: Vec<Vec<f64>>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        !self.sampling_failed
            && self.output_violations == 0
            && self.invariance_violations == 0
            && self.horizon_violations == 0
            && self.omega_nonmember == 0
    }
}

const MAX_REPORTED: usize = 20;

/// Per-coordinate box around the union of the parts; `None` if all are empty.
pub fn union_bounding_box(
    parts: &[&Polyhedron],
    tol: &Tolerances,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
    for p in parts {
        if let Some((lo, hi)) = p.bounding_box(tol)? {
            acc = Some(match acc {
                None => (lo, hi),
                Some((alo, ahi)) => (
                    alo.iter().zip(&lo).map(|(a, b)| a.min(*b)).collect(),
                    ahi.iter().zip(&hi).map(|(a, b)| a.max(*b)).collect(),
                ),
            });
        }
    }
    Ok(acc)
}

/// Uniform samples from the union of `parts` by rejection from its box.
/// Returns the samples and the number of candidates drawn.
pub fn sample_union(
    parts: &[&Polyhedron],
    count: usize,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let Some((lo, hi)) = union_bounding_box(parts, tol)? else {
        return Ok((Vec::new(), 0));
    };
    let max_attempts = count.saturating_mul(10_000).max(100_000);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let z: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| if b > a { rng.random_range(a..=b) } else { a })
            .collect();
        if parts.iter().any(|p| p.contains(&z, 0.0)) {
            out.push(z);
        }
    }
    Ok((out, attempts))
}

struct SampleOutcome {
    output_margin: f64,
    invariance_margin: f64,
    horizon_margin: f64,
    saturated: bool,
    omega: OmegaStatus,
}

/// Monte Carlo certificate: safety, one-step invariance under the saturated
/// loop, `horizon`-step output admissibility and agreement with
/// [`omega_membership`].
pub fn verify_set(
    set: SetUnderTest<'_>,
    lp: &SaturatedLoop,
    moas: &MoasResult,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let parts = set.parts();
    let (samples, attempts) = sample_union(&parts, cfg.samples, &mut rng, tol)?;

    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|z| {
            let output_margin = lp.outputs().violation(&lp.saturated_output(z));
            let next = lp.saturated_step(z);
            let invariance_margin = set.margin(&next);
            let (x, r) = crate::model::split(z);
            let traj = simulate(lp, x.as_slice(), r, cfg.horizon).expect("valid horizon");
            let horizon_margin = traj
                .outputs
                .iter()
                .map(|y| lp.outputs().violation(&DVector::from_column_slice(y)))
                .fold(f64::NEG_INFINITY, f64::max);
            SampleOutcome {
                output_margin,
                invariance_margin,
                horizon_margin,
                saturated: traj.saturated.iter().any(|&s| s),
                omega: omega_membership(lp, moas, z, cfg.t_max, tol),
            }
        })
        .collect();

    let mut report = VerificationReport {
        set: set.label(),
        seed: cfg.seed,
        samples_requested: cfg.samples,
        samples: samples.len(),
        attempts,
        horizon: cfg.horizon,
        t_max: cfg.t_max,
        sampling_failed: samples.len() < cfg.samples,
        output_violations: 0,
        invariance_violations: 0,
        horizon_violations: 0,
        omega_member: 0,
        omega_nonmember: 0,
        omega_undecided: 0,
        saturation_events: 0,
        worst_output_margin: f64::NEG_INFINITY,
        worst_invariance_margin: f64::NEG_INFINITY,
        worst_horizon_margin: f64::NEG_INFINITY,
        violating_samples: Vec::new(),
    };
    for (z, o) in samples.iter().zip(&outcomes) {
        let mut bad = false;
        if o.output_margin > tol.feas {
            report.output_violations += 1;
            bad = true;
        }
        if o.invariance_margin > tol.feas {
            report.invariance_violations += 1;
            bad = true;
        }
        if o.horizon_margin > tol.feas {
            report.horizon_violations += 1;
            bad = true;
        }
        match o.omega {
            OmegaStatus::Member(_) => report.omega_member += 1,
            OmegaStatus::NonMember(_) => {
                report.omega_nonmember += 1;
                bad = true;
            }
            OmegaStatus::Undecided => report.omega_undecided += 1,
        }
        if o.saturated {
            report.saturation_events += 1;
        }
        report.worst_output_margin = report.worst_output_margin.max(o.output_margin);
        report.worst_invariance_margin = report.worst_invariance_margin.max(o.invariance_margin);
        report.worst_horizon_margin = report.worst_horizon_margin.max(o.horizon_margin);
        if bad && report.violating_samples.len() < MAX_REPORTED {
            report.violating_samples.push(z.clone());
        }
    }
    Ok(report)
}

/// Vertices of the slice of `poly` at reference `r`, as full `(x, r)` points.
/// Planar slices are enumerated exactly; higher-dimensional ones through LP
/// optimizers along coordinate directions.
pub fn slice_vertices(poly: &Polyhedron, r: f64, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    let slice = poly.cross_section(r);
    let lift = |x: &[f64]| {
        let mut z = x.to_vec();
        z.push(r);
        z
    };
    if slice.dim() == 2 {
        return Ok(vertices_2d(&slice, tol)?.iter().map(|v| lift(v)).collect());
    }
    let d = slice.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; d];
            c[i] = s;
            match slice.maximize(&c, tol)? {
                LpResult::Optimal { point, .. } => out.push(lift(&point)),
                LpResult::Infeasible => return Ok(Vec::new()),
                LpResult::Unbounded => return Err(Error::Unbounded),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContainmentReport {
    pub grid: Vec<f64>,
    pub vertices_checked: usize,
    pub vertices_outside: usize,
    pub outside: Vec<Vec<f64>>,
    /// Largest union-membership residual over the vertices.
    pub worst_vertex_margin: f64,
    pub strictness_samples: usize,
    /// Sampled union members lying outside the baseline set.
    pub strict_members: usize,
    pub strict_witness: Option<Vec<f64>>,
}

impl ContainmentReport {
    pub fn contained(&self) -> bool {
        self.vertices_outside == 0
    }

    pub fn strict(&self) -> bool {
        self.strict_members > 0
    }
}

/// Checks every vertex of every baseline slice on `grid` for membership in
/// the union, and samples the union for points outside the baseline.
pub fn containment_check(
    result: &IsoasResult,
    moas: &MoasResult,
    grid: &[f64],
    strictness_samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ContainmentReport> {
    let mut report = ContainmentReport {
        grid: grid.to_vec(),
        vertices_checked: 0,
        vertices_outside: 0,
        outside: Vec::new(),
        worst_vertex_margin: f64::NEG_INFINITY,
        strictness_samples: 0,
        strict_members: 0,
        strict_witness: None,
    };
    let union = SetUnderTest::Isoas(result);
    for &r in grid {
        for v in slice_vertices(&moas.o, r, tol)? {
            report.vertices_checked += 1;
            let margin = union.margin(&v);
            report.worst_vertex_margin = report.worst_vertex_margin.max(margin);
            if !result.contains(&v) {
                report.vertices_outside += 1;
                if report.outside.len() < MAX_REPORTED {
                    report.outside.push(v);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (samples, _) = sample_union(&result.sets(), strictness_samples, &mut rng, tol)?;
    report.strictness_samples = samples.len();
    for z in samples {
        if moas.o.max_violation(&z) > tol.feas {
            report.strict_members += 1;
            if report.strict_witness.is_none() {
                report.strict_witness = Some(z);
            }
        }
    }
    Ok(report)
}

/// Grid classification of one planar slice.
#[derive(Debug, Clone, Serialize)]
pub struct SliceComparison {
    pub r: f64,
    pub grid_points: usize,
    pub in_moas: usize,
    pub in_isoas: usize,
    pub omega_member: usize,
    pub omega_nonmember: usize,
    pub omega_undecided: usize,
    /// Baseline points missing from the union.
    pub moas_not_isoas: usize,
    /// Union points the simulation proves inadmissible.
    pub isoas_nonmember: usize,
    /// Simulation members outside the union.
    pub omega_outside_isoas: usize,
    pub window: (Vec<f64>, Vec<f64>),
    #[serde(skip)]
    pub omega_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub slices: Vec<SliceComparison>,
    pub moas_subset_isoas: bool,
    pub moas_strict_subset: bool,
    pub isoas_subset_omega: bool,
}

/// Classifies a `grid × grid` lattice on each slice against the baseline set,
/// the union and simulated membership in the maximal saturated set.
pub fn compare_slices(
    lp: &SaturatedLoop,
    result: &IsoasResult,
    moas: &MoasResult,
    rs: &[f64],
    grid: usize,
    t_max: usize,
    tol: &Tolerances,
) -> Result<CompareReport> {
    if lp.n() != 2 {
        return Err(Error::Invalid(
            "slice comparison needs a planar state".into(),
        ));
    }
    let mut slices = Vec::new();
    for &r in rs {
        let parts: Vec<Polyhedron> = result.sets().iter().map(|p| p.cross_section(r)).collect();
        let refs: Vec<&Polyhedron> = parts.iter().collect();
        let (lo, hi) = match union_bounding_box(&refs, tol)? {
            Some(b) => b,
            None => (vec![-1.0; 2], vec![1.0; 2]),
        };
        let pad: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| 0.25 * (b - a).max(1e-6))
            .collect();
        let lo: Vec<f64> = lo.iter().zip(&pad).map(|(a, p)| a - p).collect();
        let hi: Vec<f64> = hi.iter().zip(&pad).map(|(b, p)| b + p).collect();
        let steps = grid.max(2);
        let points: Vec<Vec<f64>> = (0..steps)
            .flat_map(|i| (0..steps).map(move |j| (i, j)))
            .map(|(i, j)| {
                let t = |k: usize, a: f64, b: f64| a + (b - a) * k as f64 / (steps - 1) as f64;
                vec![t(i, lo[0], hi[0]), t(j, lo[1], hi[1]), r]
            })
            .collect();
        let classes: Vec<(bool, bool, OmegaStatus)> = points
            .par_iter()
            .map(|z| {
                (
                    moas.o.contains(z, tol.feas),
                    result.contains(z),
                    omega_membership(lp, moas, z, t_max, tol),
                )
            })
            .collect();
        let mut s = SliceComparison {
            r,
            grid_points: points.len(),
            in_moas: 0,
            in_isoas: 0,
            omega_member: 0,
            omega_nonmember: 0,
            omega_undecided: 0,
            moas_not_isoas: 0,
            isoas_nonmember: 0,
            omega_outside_isoas: 0,
            window: (lo.clone(), hi.clone()),
            omega_points: Vec::new(),
        };
        for (z, &(m, q, o)) in points.iter().zip(&classes) {
            s.in_moas += m as usize;
            s.in_isoas += q as usize;
            match o {
                OmegaStatus::Member(_) => {
                    s.omega_member += 1;
                    s.omega_points.push(z.clone());
                    if !q {
                        s.omega_outside_isoas += 1;
                    }
                }
                OmegaStatus::NonMember(_) => {
                    s.omega_nonmember += 1;
                    if q {
                        s.isoas_nonmember += 1;
                    }
                }
                OmegaStatus::Undecided => s.omega_undecided += 1,
            }
            if m && !q {
                s.moas_not_isoas += 1;
            }
        }
        slices.push(s);
    }
    Ok(CompareReport {
        moas_subset_isoas: slices.iter().all(|s| s.moas_not_isoas == 0),
        moas_strict_subset: slices.iter().any(|s| s.in_isoas > s.in_moas),
        isoas_subset_omega: slices.iter().all(|s| s.isoas_nonmember == 0),
        slices,
    })
}
