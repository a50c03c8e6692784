//! Problem files and exported artifacts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{vertices_2d, Polyhedron, Tolerances};
use crate::isoas::{IsoasResult, MoasResult};
use crate::model::{OutputConstraints, Plant, ReferenceNormalization, SaturatedLoop};
use crate::oracle::{lqr_gain, Trajectory};
use crate::propagation::Caps;

/// Where the gain came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GainSource {
    Explicit,
    Lqr { q: Vec<Vec<f64>>, r: f64 },
}

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: Option<String>,
    pub plant: Plant,
    pub outputs: OutputConstraints,
    pub lp: SaturatedLoop,
    pub gain_source: GainSource,
    pub tolerances: Tolerances,
    pub caps: Caps,
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "A",
    "B",
    "C",
    "D",
    "K",
    "lqr",
    "u_min",
    "u_max",
    "H",
    "h",
    "epsilon",
    "tolerances",
    "caps",
    "reference_normalization",
];

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_problem(&text)
}

/// Parses a problem, collecting every schema violation before failing.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(obj) = value else {
        return Err(Error::Schema(vec![
            "top level: expected a JSON object".into()
        ]));
    };
    let mut errs = Vec::new();
    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errs.push(format!("{key}: unknown field"));
        }
    }
    let a = get_matrix(&obj, "A", &mut errs);
    let n = a.as_ref().map(|m| m.nrows());
    if let Some(m) = &a {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            errs.push(format!(
                "A: expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            ));
        }
    }
    let b = get_column(&obj, "B", n, &mut errs);
    let c = get_matrix(&obj, "C", &mut errs);
    if let (Some(c), Some(n)) = (&c, n) {
        if c.ncols() != n {
            errs.push(format!("C: expected {n} columns, got {}", c.ncols()));
        }
    }
    let l = c.as_ref().map(|m| m.nrows());
    let d = get_column(&obj, "D", l, &mut errs);
    let h_mat = get_matrix(&obj, "H", &mut errs);
    if let (Some(h), Some(l)) = (&h_mat, l) {
        if h.ncols() != l {
            errs.push(format!(
                "H: expected {l} columns (one per output), got {}",
                h.ncols()
            ));
        }
    }
    let h_vec = get_vector(&obj, "h", &mut errs);
    if let (Some(h), Some(v)) = (&h_mat, &h_vec) {
        if h.nrows() != v.len() {
            errs.push(format!(
                "h: expected {} entries to match H, got {}",
                h.nrows(),
                v.len()
            ));
        }
    }
    if let Some(v) = &h_vec {
        if v.iter().any(|&x| x <= 0.0) {
            errs.push("h: entries must be strictly positive (origin interior to Y)".into());
        }
    }
    let u_min = get_number(&obj, "u_min", true, &mut errs);
    let u_max = get_number(&obj, "u_max", true, &mut errs);
    if let (Some(lo), Some(hi)) = (u_min, u_max) {
        if lo >= hi {
            errs.push(format!("u_min/u_max: need u_min < u_max, got {lo} >= {hi}"));
        } else if !(lo < 0.0 && hi > 0.0) {
            errs.push(format!(
                "u_min/u_max: the origin must be interior, got [{lo}, {hi}]"
            ));
        }
    }
    let eps = get_number(&obj, "epsilon", false, &mut errs).unwrap_or(0.01);
    if !(eps > 0.0 && eps < 1.0) {
        errs.push(format!("epsilon: must lie in (0, 1), got {eps}"));
    }
    let tolerances = match obj.get("tolerances") {
        None => Tolerances::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errs.push(format!("tolerances: {e}"));
            Tolerances::default()
        }),
    };
    let caps = match obj.get("caps") {
        None => Caps::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errs.push(format!("caps: {e}"));
            Caps::default()
        }),
    };
    let normalization = match obj.get("reference_normalization") {
        None => ReferenceNormalization::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|_| {
            errs.push("reference_normalization: expected \"input\" or \"unit\"".into());
            ReferenceNormalization::default()
        }),
    };

    enum Gain {
        K(DVector<f64>),
        Lqr(DMatrix<f64>, f64),
    }
    let gain = match (obj.get("K"), obj.get("lqr")) {
        (Some(_), Some(_)) => {
            errs.push("K/lqr: give exactly one of them".into());
            None
        }
        (None, None) => {
            errs.push("K/lqr: missing; give a gain K or lqr weights".into());
            None
        }
        (Some(_), None) => {
            let k = get_row(&obj, "K", &mut errs);
            if let (Some(k), Some(n)) = (&k, n) {
                if k.len() != n {
                    errs.push(format!("K: expected {n} entries, got {}", k.len()));
                }
            }
            k.map(Gain::K)
        }
        (None, Some(Value::Object(lqr))) => {
            let q = get_matrix(lqr, "Q", &mut errs);
            if let (Some(q), Some(n)) = (&q, n) {
                if q.nrows() != n || q.ncols() != n {
                    errs.push(format!(
                        "lqr.Q: expected {n}x{n}, got {}x{}",
                        q.nrows(),
                        q.ncols()
                    ));
                }
            }
            let r = match lqr.get("R") {
                Some(Value::Number(x)) => x.as_f64(),
                Some(v) => match to_matrix(v) {
                    Some(m) if m.nrows() == 1 && m.ncols() == 1 => Some(m[(0, 0)]),
                    _ => {
                        errs.push("lqr.R: expected a positive scalar or [[r]]".into());
                        None
                    }
                },
                None => {
                    errs.push("lqr.R: missing".into());
                    None
                }
            };
            if let Some(r) = r {
                if r <= 0.0 {
                    errs.push(format!("lqr.R: must be positive, got {r}"));
                }
            }
            q.zip(r).map(|(q, r)| Gain::Lqr(q, r))
        }
        (None, Some(_)) => {
            errs.push("lqr: expected an object {\"Q\": [[...]], \"R\": ...}".into());
            None
        }
    };
    if !errs.is_empty() {
        return Err(Error::Schema(errs));
    }
    let name = obj.get("name").and_then(Value::as_str).map(str::to_owned);
    let plant = Plant::new(a.unwrap(), b.unwrap(), c.unwrap(), d.unwrap())?;
    let outputs = OutputConstraints::new(h_mat.unwrap(), DVector::from_vec(h_vec.unwrap()))?;
    let (k, gain_source) = match gain.unwrap() {
        Gain::K(k) => (k, GainSource::Explicit),
        Gain::Lqr(q, r) => {
            let k = lqr_gain(&plant, &q, r)?;
            let rows = (0..q.nrows())
                .map(|i| q.row(i).iter().cloned().collect())
                .collect();
            (k, GainSource::Lqr { q: rows, r })
        }
    };
    let lp = SaturatedLoop::new(
        plant.clone(),
        outputs.clone(),
        k,
        u_min.unwrap(),
        u_max.unwrap(),
        eps,
        normalization,
    )?;
    Ok(Problem {
        name,
        plant,
        outputs,
        lp,
        gain_source,
        tolerances,
        caps,
    })
}

fn to_matrix(v: &Value) -> Option<DMatrix<f64>> {
    let rows = v.as_array()?;
    let parsed: Option<Vec<Vec<f64>>> = rows
        .iter()
        .map(|r| r.as_array()?.iter().map(Value::as_f64).collect())
        .collect();
    let parsed = parsed?;
    let cols = parsed.first().map_or(0, Vec::len);
    if parsed.is_empty() || cols == 0 || parsed.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

fn to_vector(v: &Value) -> Option<Vec<f64>> {
    let arr = v.as_array()?;
    if arr.is_empty() {
        return None;
    }
    arr.iter().map(Value::as_f64).collect()
}

fn get_matrix(obj: &Map<String, Value>, key: &str, errs: &mut Vec<String>) -> Option<DMatrix<f64>> {
    match obj.get(key) {
        None => {
            errs.push(format!("{key}: missing"));
            None
        }
        Some(v) => {
            let m = to_matrix(v);
            if m.is_none() {
                errs.push(format!(
                    "{key}: expected a nonempty rectangular matrix of numbers"
                ));
            }
            m
        }
    }
}

fn get_number(
    obj: &Map<String, Value>,
    key: &str,
    required: bool,
    errs: &mut Vec<String>,
) -> Option<f64> {
    match obj.get(key) {
        None => {
            if required {
                errs.push(format!("{key}: missing"));
            }
            None
        }
        Some(v) => {
            let x = v.as_f64();
            if x.is_none() {
                errs.push(format!("{key}: expected a number"));
            }
            x
        }
    }
}

fn get_vector(obj: &Map<String, Value>, key: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    match obj.get(key) {
        None => {
            errs.push(format!("{key}: missing"));
            None
        }
        Some(v) => {
            let out = to_vector(v);
            if out.is_none() {
                errs.push(format!("{key}: expected a nonempty array of numbers"));
            }
            out
        }
    }
}

/// A row vector given as `[..]` or `[[..]]`.
fn get_row(obj: &Map<String, Value>, key: &str, errs: &mut Vec<String>) -> Option<DVector<f64>> {
    let v = obj.get(key)?;
    if let Some(x) = to_vector(v) {
        return Some(DVector::from_vec(x));
    }
    match to_matrix(v) {
        Some(m) if m.nrows() == 1 => Some(DVector::from_iterator(m.ncols(), m.iter().cloned())),
        _ => {
            errs.push(format!("{key}: expected a row vector"));
            None
        }
    }
}

/// A single column given as `[..]` or `[[..], [..]]` with one column.
fn get_column(
    obj: &Map<String, Value>,
    key: &str,
    len: Option<usize>,
    errs: &mut Vec<String>,
) -> Option<DVector<f64>> {
    let Some(v) = obj.get(key) else {
        errs.push(format!("{key}: missing"));
        return None;
    };
    let col = to_vector(v)
        .map(DVector::from_vec)
        .or_else(|| match to_matrix(v) {
            Some(m) if m.ncols() == 1 => Some(m.column(0).into_owned()),
            _ => None,
        });
    match col {
        None => {
            errs.push(format!("{key}: expected a column (single input only)"));
            None
        }
        Some(c) => {
            if let Some(len) = len {
                if c.len() != len {
                    errs.push(format!("{key}: expected {len} rows, got {}", c.len()));
                }
            }
            Some(c)
        }
    }
}

/// Set export: the three region sets, the baseline and run metadata.
pub fn sets_json(
    result: &IsoasResult,
    moas: Option<&MoasResult>,
    problem: Option<&Problem>,
) -> Value {
    let mut meta = json!({
        "iterations": result.final_index,
        "rounds": result.rounds,
        "caps": result.caps,
        "tolerances": result.tolerances,
        "rows": [result.q.n_rows(), result.q_up.n_rows(), result.q_lo.n_rows()],
        "trace": result.trace,
    });
    if let Some(p) = problem {
        meta["problem"] = problem_meta(p);
    }
    if let Some(m) = moas {
        meta["moas_steps"] = json!(m.steps);
    }
    json!({
        "Q": result.q,
        "Q_up": result.q_up,
        "Q_lo": result.q_lo,
        "moas": moas.map(|m| &m.o),
        "meta": meta,
    })
}

pub fn moas_json(moas: &MoasResult, problem: Option<&Problem>) -> Value {
    let mut out = json!({ "O": moas.o, "steps": moas.steps });
    if let Some(p) = problem {
        out["meta"] = json!({ "problem": problem_meta(p) });
    }
    out
}

pub fn problem_meta(p: &Problem) -> Value {
    let lp = &p.lp;
    json!({
        "name": p.name,
        "n": lp.n(),
        "K": lp.gain().as_slice(),
        "gain": p.gain_source,
        "u_min": lp.u_lo(),
        "u_max": lp.u_hi(),
        "epsilon": lp.eps(),
        "G_x": lp.basis().g_x.as_slice(),
        "G_u": lp.basis().g_u,
        "G_y": lp.basis().g_y.as_slice(),
        "reference_interval": lp.reference_interval(),
        "reference_normalization": lp.normalization(),
    })
}

/// Reads back `Q`, `Q_up`, `Q_lo` (and `moas` if present) from a set export.
pub fn read_sets_json(
    value: &Value,
) -> Result<(Polyhedron, Polyhedron, Polyhedron, Option<Polyhedron>)> {
    let get = |k: &str| -> Result<Polyhedron> {
        let v = value
            .get(k)
            .ok_or_else(|| Error::Schema(vec![format!("{k}: missing")]))?;
        Ok(serde_json::from_value(v.clone())?)
    };
    let moas = match value.get("moas") {
        Some(Value::Null) | None => None,
        Some(v) => Some(serde_json::from_value(v.clone())?),
    };
    Ok((get("Q")?, get("Q_up")?, get("Q_lo")?, moas))
}

/// Fixed 17-significant-digit float formatting.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Vertex CSV: header `vertex_index,x1,x2`, polygons separated by a blank
/// record. An empty polygon contributes no rows.
pub fn vertex_csv(polygons: &[Vec<[f64; 2]>]) -> String {
    let mut out = String::from("vertex_index,x1,x2\n");
    for (i, poly) in polygons.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (j, v) in poly.iter().enumerate() {
            let _ = writeln!(out, "{j},{},{}", fmt17(v[0]), fmt17(v[1]));
        }
    }
    out
}

/// Polygons of a vertex CSV, in file order.
pub fn parse_vertex_csv(text: &str) -> Result<Vec<Vec<[f64; 2]>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("vertex_index,x1,x2") => {}
        other => return Err(Error::Invalid(format!("unexpected CSV header {other:?}"))),
    }
    let mut polygons = vec![Vec::new()];
    for line in lines {
        if line.trim().is_empty() {
            polygons.push(Vec::new());
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Invalid(format!("bad CSV record {line:?}")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Invalid(format!("{s:?}: {e}")))
        };
        polygons
            .last_mut()
            .unwrap()
            .push([parse(fields[1])?, parse(fields[2])?]);
    }
    Ok(polygons)
}

/// Slice vertices of `poly` at `r`; empty on an empty slice.
pub fn slice_polygon(poly: &Polyhedron, r: f64, tol: &Tolerances) -> Result<Vec<[f64; 2]>> {
    vertices_2d(&poly.cross_section(r), tol)
}

/// One JSON line per (round, region, step): the retained generation and
/// the slice of the set accumulated so far at `r`. Requires a traced run.
pub fn trace_jsonl(result: &IsoasResult, r: f64, tol: &Tolerances) -> Result<String> {
    let mut out = String::new();
    for round in &result.trace {
        let (Some(start), Some(gens)) = (&round.start, &round.generations) else {
            return Err(Error::Invalid(
                "result was computed without trace recording".into(),
            ));
        };
        for (k, kind) in crate::model::RegionKind::ALL.iter().enumerate() {
            let mut set = start[k].clone();
            for (step, generation) in gens[k].iter().enumerate() {
                if step > 0 {
                    set = set.intersect(generation)?;
                }
                let vertices = match (set.dim(), slice_polygon(&set, r, tol)) {
                    (3, Ok(v)) => Some(v),
                    _ => None,
                };
                let record = json!({
                    "i": round.index,
                    "region": kind,
                    "k": step,
                    "H": generation.rows().map(|(n, _)| n.to_vec()).collect::<Vec<_>>(),
                    "h": generation.offsets(),
                    "r": r,
                    "vertices": vertices,
                });
                out.push_str(&serde_json::to_string(&record)?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Trajectory CSV: `k, x1..xn, u, y1..yl, saturated`; the final state row
/// has empty input/output fields.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let l = traj.outputs.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("u".into());
    header.extend((1..=l).map(|i| format!("y{i}")));
    header.push("saturated".into());
    let mut out = header.join(",");
    out.push('\n');
    for (k, x) in traj.states.iter().enumerate() {
        let mut fields = vec![k.to_string()];
        fields.extend(x.iter().map(|&v| fmt17(v)));
        if k < traj.inputs.len() {
            fields.push(fmt17(traj.inputs[k]));
            fields.extend(traj.outputs[k].iter().map(|&v| fmt17(v)));
            fields.push(traj.saturated[k].to_string());
        } else {
            fields.extend(std::iter::repeat_n(String::new(), l + 2));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes pretty JSON followed by a newline.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut f = std::fs::File::create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = r#"{
        "A": [[1, 0.1], [0, 1]], "B": [[0], [0.1]], "C": [[1, 0], [0, 1]], "D": [0, 0],
        "K": [0.9, 1.7], "u_min": -2, "u_max": 2,
        "H": [[1, 0], [-1, 0], [0, 1], [0, -1]], "h": [5, 5, 1, 1]
    }"#;

    #[test]
    fn parses_minimal_problem() {
        let p = parse_problem(EX1).unwrap();
        assert_eq!(p.lp.n(), 2);
        assert_eq!(p.plant.l(), 2);
        assert_eq!(p.lp.basis().g_u, 0.0);
        assert_eq!(p.lp.eps(), 0.01);
    }

    #[test]
    fn lists_every_schema_error() {
        let text = r#"{"A": [[1, 0.1], [0, 1]], "B": [0, 0.1, 3], "C": [[1, 0]], "D": [0],
            "u_min": 2, "u_max": -2, "H": [[1]], "h": [1, 2], "bogus": 1}"#;
        let Err(Error::Schema(errs)) = parse_problem(text) else {
            panic!("expected schema error")
        };
        let joined = errs.join("\n");
        for needle in ["bogus", "B:", "u_min/u_max", "h:", "K/lqr"] {
            assert!(joined.contains(needle), "{needle} missing from {joined}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let polys = vec![
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![],
            vec![[0.1, -0.2]],
        ];
        let text = vertex_csv(&polys);
        assert!(text.starts_with("vertex_index,x1,x2\n0,0.0000000000000000e0,"));
        assert_eq!(parse_vertex_csv(&text).unwrap(), polys);
    }
}
