//! Constraint sharing between the three regions, and the linear-loop
//! maximal output admissible set used as a baseline.

use log::{debug, info};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    certifies_redundant, lp_solve_rows, ConstraintBundle, Polyhedron, RowRef, Tolerances,
};
use crate::model::{build_regions, RegionKind, RegionTriple, SaturatedLoop};
use crate::propagation::{
    nonsat_seed, propagate_nonsat, propagate_saturated, sat_seed, Caps, PropagationConfig,
    PropagationResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoasConfig {
    pub tolerances: Tolerances,
    pub caps: Caps,
    pub empty_set_prevention: bool,
    pub erosion_prevention: bool,
    /// Keep per-step generations and per-round sets in the trace.
    pub record_trace: bool,
}

impl Default for IsoasConfig {
    fn default() -> Self {
        IsoasConfig {
            tolerances: Tolerances::default(),
            caps: Caps::default(),
            empty_set_prevention: true,
            erosion_prevention: true,
            record_trace: false,
        }
    }
}

impl IsoasConfig {
    fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            tolerances: self.tolerances,
            caps: self.caps,
            empty_set_prevention: self.empty_set_prevention,
            record_trace: self.record_trace,
        }
    }
}

/// Per-region summary of one outer round, ordered `[Q, Q_up, Q_lo]`.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace {
    pub index: usize,
    /// Seed rows kept after reduction against the round's starting region.
    pub seed_rows: [usize; 3],
    /// Rows of the resulting sets.
    pub rows: [usize; 3],
    pub steps: [usize; 3],
    pub prevention_dropped: [usize; 3],
    /// Saturated rows removed by erosion filtering (`Q` entry is always 0).
    pub erosion_dropped: [usize; 3],
    /// Rows retained by the round's propagation (seed included).
    pub added_rows: [usize; 3],
    /// Rows sent to the next round.
    pub shared_rows: [usize; 3],
    /// Starting sets `Q_{i,0}` (region ∩ reduced seed); only with tracing.
    #[serde(skip)]
    pub start: Option<[Polyhedron; 3]>,
    /// Final sets `Q_{i,∞}`; only with tracing.
    #[serde(skip)]
    pub sets: Option<[Polyhedron; 3]>,
    /// Retained generations per step; only with tracing.
    #[serde(skip)]
    pub generations: Option<[Vec<Polyhedron>; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoasResult {
    #[serde(rename = "Q")]
    pub q: Polyhedron,
    #[serde(rename = "Q_up")]
    pub q_up: Polyhedron,
    #[serde(rename = "Q_lo")]
    pub q_lo: Polyhedron,
    /// Index `i*` of the final sets.
    pub final_index: usize,
    /// Propagation rounds performed, including a final round that adds
    /// nothing when the shared rows do not vanish on their own.
    pub rounds: usize,
    pub regions: RegionTriple,
    pub trace: Vec<RoundTrace>,
    pub caps: Caps,
    pub tolerances: Tolerances,
}

impl IsoasResult {
    pub fn get(&self, kind: RegionKind) -> &Polyhedron {
        match kind {
            RegionKind::NonSaturated => &self.q,
            RegionKind::UpperSaturated => &self.q_up,
            RegionKind::LowerSaturated => &self.q_lo,
        }
    }

    pub fn sets(&self) -> [&Polyhedron; 3] {
        [&self.q, &self.q_up, &self.q_lo]
    }

    /// Union membership with tolerance `τ_feas`.
    pub fn contains(&self, z: &[f64]) -> bool {
        membership(self, z)
    }
}

/// `z ∈ Q ∪ Q_up ∪ Q_lo` within the feasibility tolerance.
pub fn membership(result: &IsoasResult, z: &[f64]) -> bool {
    let tol = result.tolerances.feas;
    result.sets().iter().any(|p| p.contains(z, tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct MoasResult {
    #[serde(rename = "O")]
    pub o: Polyhedron,
    pub steps: usize,
}

impl MoasResult {
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.o.contains(z, tol)
    }
}

/// Maximal output admissible set of the linear loop with the reference
/// restricted to `(1 - ε)R`.
pub fn compute_moas(lp: &SaturatedLoop, cfg: &IsoasConfig) -> Result<MoasResult> {
    lp.ensure_valid()?;
    let band = lp.reference_band();
    let c = lp.control_row();
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    let mut seed = Polyhedron::universe(lp.dim());
    seed.push_normalized(&c, lp.u_hi());
    seed.push_normalized(&neg, -lp.u_lo());
    let seed = seed.intersect(&nonsat_seed(lp))?;
    let mut pcfg = cfg.propagation();
    pcfg.empty_set_prevention = false;
    let res = propagate_nonsat(
        lp,
        &band,
        &ConstraintBundle::seed(seed, RegionKind::NonSaturated),
        &pcfg,
    )
    .map_err(|e| match e {
        Error::CapExceeded { what, cap, hint } => Error::CapExceeded {
            what,
            cap,
            hint: format!(
                "{hint}; unexpected for a Schur closed loop with 0 interior to the constraints"
            ),
        },
        other => other,
    })?;
    info!("MOAS: {} rows after {} steps", res.q.n_rows(), res.steps);
    Ok(MoasResult {
        o: res.q,
        steps: res.steps,
    })
}

/// Drops saturated rows already implied inside the saturated region by the
/// non-saturated propagated rows, generation by generation.
pub fn erosion_filter(
    sat_bundle: &ConstraintBundle,
    sat_region: &Polyhedron,
    nonsat_rows: &Polyhedron,
    tol: &Tolerances,
) -> Result<ConstraintBundle> {
    let context: Vec<RowRef<'_>> = sat_region
        .row_refs()
        .chain(nonsat_rows.row_refs())
        .collect();
    let mut out = ConstraintBundle::new(sat_bundle.dim(), sat_bundle.origin());
    for generation in sat_bundle.generations() {
        let mut keep = Vec::new();
        for l in 0..generation.n_rows() {
            let outcome = lp_solve_rows(generation.row(l), &context, tol)?;
            if !certifies_redundant(&outcome, generation.offset(l), tol) {
                keep.push(l);
            }
        }
        out.push(generation.select(&keep));
    }
    Ok(out)
}

fn concat(dim: usize, origin: RegionKind, parts: &[&ConstraintBundle]) -> ConstraintBundle {
    let mut out = ConstraintBundle::new(dim, origin);
    for p in parts {
        out.extend(p);
    }
    out
}

/// The input-saturated output-admissible set: propagate in all three
/// regions, filter the saturated bundles, share, repeat until nothing new is
/// shared.
pub fn compute_isoas(lp: &SaturatedLoop, cfg: &IsoasConfig) -> Result<IsoasResult> {
    lp.ensure_valid()?;
    let tol = &cfg.tolerances;
    let pcfg = cfg.propagation();
    let dim = lp.dim();
    let regions = build_regions(lp);
    let base_rows = regions.s.n_rows();

    let mut current = [
        regions.s.clone(),
        regions.s_up.clone(),
        regions.s_lo.clone(),
    ];
    let mut seeds = [
        ConstraintBundle::seed(nonsat_seed(lp), RegionKind::NonSaturated),
        ConstraintBundle::seed(
            sat_seed(lp, RegionKind::UpperSaturated),
            RegionKind::UpperSaturated,
        ),
        ConstraintBundle::seed(
            sat_seed(lp, RegionKind::LowerSaturated),
            RegionKind::LowerSaturated,
        ),
    ];
    let mut trace = Vec::new();

    for i in 0..cfg.caps.i_max {
        let run = |k: usize| -> Result<PropagationResult> {
            match RegionKind::ALL[k] {
                RegionKind::NonSaturated => propagate_nonsat(lp, &current[k], &seeds[k], &pcfg),
                side => propagate_saturated(lp, side, &current[k], &seeds[k], &pcfg),
            }
        };
        let (r0, (r1, r2)) = rayon::join(|| run(0), || rayon::join(|| run(1), || run(2)));
        let results = [r0?, r1?, r2?];

        let seed_rows = [0, 1, 2].map(|k| {
            results[k]
                .bundle
                .generations()
                .first()
                .map_or(0, Polyhedron::n_rows)
        });
        let start = cfg.record_trace.then(|| {
            [0, 1, 2].map(|k| {
                let mut s = current[k].clone();
                if let Some(g) = results[k].bundle.generations().first() {
                    s = s.intersect(g).expect("same dimension");
                }
                s
            })
        });

        // Every propagated row of Q_i, without the rows of S itself.
        let q_rows = results[0]
            .q
            .select(&(base_rows..results[0].q.n_rows()).collect::<Vec<_>>());
        let mut up = results[1].bundle.clone();
        let mut lo = results[2].bundle.clone();
        let mut erosion_dropped = [0; 3];
        if cfg.erosion_prevention {
            let up_f = erosion_filter(&up, &regions.s_up, &q_rows, tol)?;
            let lo_f = erosion_filter(&lo, &regions.s_lo, &q_rows, tol)?;
            erosion_dropped = [0, up.n_rows() - up_f.n_rows(), lo.n_rows() - lo_f.n_rows()];
            up = up_f;
            lo = lo_f;
        }
        let q_bundle = &results[0].bundle;
        let next_seeds = [
            concat(dim, RegionKind::NonSaturated, &[&up, &lo]),
            concat(dim, RegionKind::UpperSaturated, &[q_bundle, &lo]),
            concat(dim, RegionKind::LowerSaturated, &[&up, q_bundle]),
        ];
        let next_regions = [
            results[0].q.clone(),
            results[1].q.clone(),
            results[2].q.clone(),
        ];
        let shared_rows = [0, 1, 2].map(|k| next_seeds[k].n_rows());
        let rows = [0, 1, 2].map(|k| results[k].q.n_rows());
        let added = [0, 1, 2].map(|k| results[k].bundle.n_rows());
        debug!("round {i}: rows {rows:?}, added {added:?}, shared {shared_rows:?}, eroded {erosion_dropped:?}");
        trace.push(RoundTrace {
            index: i,
            seed_rows,
            added_rows: added,
            rows,
            steps: [0, 1, 2].map(|k| results[k].steps),
            prevention_dropped: [0, 1, 2].map(|k| results[k].prevention_dropped),
            erosion_dropped,
            shared_rows,
            start,
            sets: cfg.record_trace.then(|| next_regions.clone()),
            generations: cfg
                .record_trace
                .then(|| [0, 1, 2].map(|k| results[k].bundle.generations().to_vec())),
        });

        // A round after the first that adds no row leaves every set as it
        // was: the previous sets are the fixed point.
        let unchanged = i > 0 && added.iter().all(|&n| n == 0);
        let final_index = if unchanged { i - 1 } else { i };
        current = next_regions;
        if unchanged || shared_rows.iter().all(|&n| n == 0) {
            let [q, q_up, q_lo] = current;
            info!(
                "ISOAS: i* = {final_index} after {} rounds, rows [{}, {}, {}]",
                i + 1,
                q.n_rows(),
                q_up.n_rows(),
                q_lo.n_rows()
            );
            return Ok(IsoasResult {
                q,
                q_up,
                q_lo,
                final_index,
                rounds: i + 1,
                regions,
                trace,
                caps: cfg.caps,
                tolerances: cfg.tolerances,
            });
        }
        seeds = next_seeds;
    }
    Err(Error::CapExceeded {
        what: "outer iterations",
        cap: cfg.caps.i_max,
        hint:
            "constraint sharing did not reach a fixed point; a limit cycle or too tight tolerances"
                .into(),
    })
}
