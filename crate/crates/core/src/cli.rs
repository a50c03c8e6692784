//! Command-line driver behind the `isoas` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{
    load_problem, moas_json, problem_meta, sets_json, slice_polygon, trace_jsonl, trajectory_csv,
    vertex_csv, write_json, Problem,
};
use crate::isoas::{compute_isoas, compute_moas, IsoasConfig};
use crate::oracle::{
    compare_slices, containment_check, simulate, verify_set, SetUnderTest, VerifyConfig,
};

/// Exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SCHEMA: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const CAP: i32 = 5;
    pub const VERIFICATION: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "isoas",
    version,
    about = "Input-saturated output-admissible sets for single-input LTI systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear-loop maximal output admissible set.
    Moas(Common),
    /// Input-saturated set; writes the sets and a per-step trace.
    Isoas {
        #[command(flatten)]
        common: Common,
        /// Reference value for the trace's cross-section vertices.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        trace_r: f64,
    },
    /// Vertex CSVs of the cross-sections at the given reference values.
    Slice {
        #[command(flatten)]
        common: Common,
        #[arg(
            long = "r",
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_value = "0"
        )]
        r: Vec<f64>,
    },
    /// Monte Carlo certificate of safety and invariance.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, value_enum, default_value_t = Target::Isoas)]
        set: Target,
        /// Grid size over the reference range for the containment check.
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Baseline vs saturated set vs simulated maximal set on planar slices.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(
            long = "r",
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_value = "0"
        )]
        r: Vec<f64>,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 81)]
        grid: usize,
        #[arg(long, default_value_t = 1000)]
        t_max: usize,
    },
    /// Saturated closed-loop trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            required = true
        )]
        x0: Vec<f64>,
        #[arg(long = "r", default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Isoas,
    Moas,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem JSON file.
    pub problem: PathBuf,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Allow the ablation switches below.
    #[arg(long)]
    pub unsafe_repro: bool,
    #[arg(long, requires = "unsafe_repro")]
    pub no_empty_set_prevention: bool,
    #[arg(long, requires = "unsafe_repro")]
    pub no_erosion_prevention: bool,
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub red_tol: Option<f64>,
    #[arg(long)]
    pub geom_tol: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub i_max: Option<usize>,
    #[arg(long)]
    pub row_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Sampling {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 500)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub t_max: usize,
}

impl Common {
    fn load(&self) -> Result<(Problem, IsoasConfig)> {
        let problem = load_problem(&self.problem)?;
        let mut cfg = IsoasConfig {
            tolerances: problem.tolerances,
            caps: problem.caps,
            ..IsoasConfig::default()
        };
        if let Some(v) = self.feas_tol {
            cfg.tolerances.feas = v;
        }
        if let Some(v) = self.red_tol {
            cfg.tolerances.redundancy = v;
        }
        if let Some(v) = self.geom_tol {
            cfg.tolerances.geom = v;
        }
        if let Some(v) = self.k_max {
            cfg.caps.k_max = v;
        }
        if let Some(v) = self.i_max {
            cfg.caps.i_max = v;
        }
        if let Some(v) = self.row_cap {
            cfg.caps.row_cap = v;
        }
        if self.no_empty_set_prevention {
            warn!("empty-set prevention disabled; saturated sets may collapse to the empty set");
            eprintln!("warning: empty-set prevention disabled (--unsafe-repro)");
            cfg.empty_set_prevention = false;
        }
        if self.no_erosion_prevention {
            warn!("erosion prevention disabled; the result may lose the baseline set");
            eprintln!("warning: erosion prevention disabled (--unsafe-repro)");
            cfg.erosion_prevention = false;
        }
        std::fs::create_dir_all(&self.out)?;
        Ok((problem, cfg))
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Schema(_)
        | Error::Json(_)
        | Error::Configuration(_)
        | Error::Invalid(_)
        | Error::Dimension { .. } => exit::SCHEMA,
        Error::Validation { .. } | Error::UnsupportedPlant(_) | Error::RiccatiDivergence(_) => {
            exit::VALIDATION
        }
        Error::CapExceeded { .. } => exit::CAP,
        _ => exit::FAILURE,
    }
}

/// Machine-readable error record written to stderr.
pub fn error_json(err: &Error) -> serde_json::Value {
    let kind = match err {
        Error::Schema(_) => "schema",
        Error::Json(_) => "json",
        Error::Configuration(_) => "configuration",
        Error::Invalid(_) | Error::Dimension { .. } => "invalid_input",
        Error::Validation { .. } => "validation",
        Error::UnsupportedPlant(_) => "unsupported_plant",
        Error::RiccatiDivergence(_) => "riccati_divergence",
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::Io(_) => "io",
        Error::Solver(_) => "solver",
        Error::Unbounded => "unbounded",
        Error::Precondition(_) => "precondition",
    };
    let mut out = json!({ "error": kind, "message": err.to_string(), "exit_code": exit_code(err) });
    match err {
        Error::Schema(fields) => out["fields"] = json!(fields),
        Error::Validation { diagnostics, .. } => out["diagnostics"] = json!(diagnostics),
        Error::CapExceeded { what, cap, .. } => {
            out["cap"] = json!({ "what": what, "value": cap });
        }
        _ => {}
    }
    out
}

fn file(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

/// Runs one parsed command and returns its exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Moas(common) => {
            let (problem, cfg) = common.load()?;
            let moas = compute_moas(&problem.lp, &cfg)?;
            write_json(
                file(&common.out, "moas.json"),
                &moas_json(&moas, Some(&problem)),
            )?;
            info!("wrote moas.json ({} rows)", moas.o.n_rows());
        }
        Command::Isoas { common, trace_r } => {
            let (problem, mut cfg) = common.load()?;
            cfg.record_trace = true;
            let result = compute_isoas(&problem.lp, &cfg)?;
            let moas = compute_moas(&problem.lp, &cfg)?;
            write_json(
                file(&common.out, "isoas.json"),
                &sets_json(&result, Some(&moas), Some(&problem)),
            )?;
            std::fs::write(
                file(&common.out, "trace.jsonl"),
                trace_jsonl(&result, trace_r, &cfg.tolerances)?,
            )?;
            for (label, set) in ["Q", "Q_up", "Q_lo"].iter().zip(result.sets()) {
                if set.is_empty(&cfg.tolerances)? {
                    warn!("{label} is empty");
                    eprintln!("warning: {label} is empty");
                }
            }
        }
        Command::Slice { common, r } => {
            let (problem, cfg) = common.load()?;
            if problem.lp.n() != 2 {
                return Err(Error::Invalid("slice export needs a planar state".into()));
            }
            let result = compute_isoas(&problem.lp, &cfg)?;
            let moas = compute_moas(&problem.lp, &cfg)?;
            let mut manifest = Vec::new();
            for (idx, &rv) in r.iter().enumerate() {
                let mut polygons = Vec::new();
                for set in [&result.q, &result.q_up, &result.q_lo, &moas.o] {
                    polygons.push(slice_polygon(set, rv, &cfg.tolerances)?);
                }
                let name = format!("slice_{idx}.csv");
                std::fs::write(file(&common.out, &name), vertex_csv(&polygons))?;
                manifest.push(json!({
                    "file": name,
                    "r": rv,
                    "layers": ["Q", "Q_up", "Q_lo", "moas"],
                    "vertex_counts": polygons.iter().map(Vec::len).collect::<Vec<_>>(),
                }));
            }
            write_json(file(&common.out, "slices.json"), &manifest)?;
        }
        Command::Verify {
            common,
            sampling,
            set,
            grid,
        } => {
            let (problem, cfg) = common.load()?;
            let lp = &problem.lp;
            let moas = compute_moas(lp, &cfg)?;
            let vcfg = VerifyConfig {
                samples: sampling.samples,
                horizon: sampling.horizon,
                seed: sampling.seed,
                t_max: sampling.t_max,
                tolerances: cfg.tolerances,
            };
            let (report, containment) = match set {
                Target::Moas => (
                    verify_set(SetUnderTest::Moas(&moas), lp, &moas, &vcfg)?,
                    None,
                ),
                Target::Isoas => {
                    let result = compute_isoas(lp, &cfg)?;
                    let report = verify_set(SetUnderTest::Isoas(&result), lp, &moas, &vcfg)?;
                    let containment = containment_check(
                        &result,
                        &moas,
                        &lp.reference_grid(grid),
                        1000,
                        sampling.seed,
                        &cfg.tolerances,
                    )?;
                    (report, Some(containment))
                }
            };
            let passed = report.passed() && containment.as_ref().is_none_or(|c| c.contained());
            write_json(
                file(&common.out, "verify_report.json"),
                &json!({
                    "passed": passed,
                    "report": report,
                    "containment": containment,
                    "problem": problem_meta(&problem),
                    "ablation": {
                        "empty_set_prevention": cfg.empty_set_prevention,
                        "erosion_prevention": cfg.erosion_prevention,
                    },
                }),
            )?;
            if !passed {
                eprintln!("verification failed; see verify_report.json");
                return Ok(exit::VERIFICATION);
            }
        }
        Command::Compare {
            common,
            r,
            grid,
            t_max,
        } => {
            let (problem, cfg) = common.load()?;
            let lp = &problem.lp;
            let result = compute_isoas(lp, &cfg)?;
            let moas = compute_moas(lp, &cfg)?;
            let report = compare_slices(lp, &result, &moas, &r, grid, t_max, &cfg.tolerances)?;
            for (idx, s) in report.slices.iter().enumerate() {
                let mut polygons = Vec::new();
                for set in [&moas.o, &result.q, &result.q_up, &result.q_lo] {
                    polygons.push(slice_polygon(set, s.r, &cfg.tolerances)?);
                }
                std::fs::write(
                    file(&common.out, &format!("compare_{idx}.csv")),
                    vertex_csv(&polygons),
                )?;
                let points: Vec<Vec<[f64; 2]>> =
                    vec![s.omega_points.iter().map(|z| [z[0], z[1]]).collect()];
                std::fs::write(
                    file(&common.out, &format!("omega_{idx}.csv")),
                    vertex_csv(&points),
                )?;
            }
            write_json(
                file(&common.out, "compare_report.json"),
                &json!({
                    "report": report,
                    "layers": ["moas", "Q", "Q_up", "Q_lo"],
                    "problem": problem_meta(&problem),
                }),
            )?;
        }
        Command::Simulate {
            common,
            x0,
            r,
            steps,
        } => {
            let (problem, _) = common.load()?;
            let traj = simulate(&problem.lp, &x0, r, steps)?;
            std::fs::write(file(&common.out, "trajectory.csv"), trajectory_csv(&traj))?;
        }
    }
    Ok(exit::OK)
}

/// Parses `args`, runs, and reports errors as JSON on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            exit_code(&err)
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("ISOAS_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

pub fn main() -> i32 {
    init_logging();
    main_with_args(std::env::args_os())
}
