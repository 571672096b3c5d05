use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mcs_core::diagnostics::{all_reports, check_flux, ConvergenceTable, InvariantReport, Status};
use mcs_core::snapshot::Snapshot;
use mcs_core::solver::{
    q_sweep_with_limit, solve_coupled, solve_limit, Problem, ProblemSpec, SolutionBundle, SolveSummary,
};
use mcs_core::{Error, ScalarField};
use serde::{Deserialize, Serialize};

use crate::config::{self, Run, TableFormat};

/// Process exit status of every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    /// Bad configuration, unreadable or mismatched input.
    InputError = 1,
    /// An invariant check failed or the pointwise bounds were violated.
    InvariantFailure = 2,
    /// The solver did not produce a solution.
    SolverFailure = 3,
}

impl Outcome {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn of_error(e: &Error) -> Self {
        match e {
            Error::NoConvergence { .. } | Error::QTooSmall { .. } | Error::Infeasible { .. } => {
                Outcome::SolverFailure
            }
            Error::BoundsViolation { .. } => Outcome::InvariantFailure,
            _ => Outcome::InputError,
        }
    }

    fn worst(self, other: Self) -> Self {
        if other as u8 > self as u8 {
            other
        } else {
            self
        }
    }
}

/// Contents of `summary.json` written by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub spec: ProblemSpec,
    pub outcome: String,
    pub error: Option<String>,
    pub solve: Option<SolveSummary>,
    /// `[∫w, ∫φ(s - v)]`
    pub flux: Option<[f64; 2]>,
    pub reports: Vec<InvariantReport>,
}

pub const SNAPSHOT_NAMES: [&str; 4] = ["u", "v", "w", "u0"];

fn fail(msg: impl std::fmt::Display) -> Outcome {
    eprintln!("error: {msg}");
    Outcome::InputError
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Snapshot metadata: the problem spec as TOML.
pub fn spec_metadata(spec: &ProblemSpec) -> String {
    toml::to_string(spec).expect("problem specs serialize to TOML")
}

fn load_run(config: &Path, out: Option<&Path>) -> Result<Run, Outcome> {
    let mut run = config::load(config).map_err(|e| fail(format!("{}: {e}", config.display())))?;
    if let Some(dir) = out {
        run.output.dir = dir.to_path_buf();
    }
    fs::create_dir_all(&run.output.dir)
        .map_err(|e| fail(format!("{}: {e}", run.output.dir.display())))?;
    Ok(run)
}

pub fn print_reports(reports: &[InvariantReport]) {
    for r in reports {
        println!(
            "{:<20} {:<4} discrepancy {:.17e} tolerance {:.17e}",
            r.name,
            r.status,
            r.discrepancy(),
            r.tolerance
        );
    }
}

fn reports_outcome(reports: &[InvariantReport]) -> Outcome {
    if reports.iter().all(InvariantReport::passed) {
        Outcome::Success
    } else {
        Outcome::InvariantFailure
    }
}

pub fn write_snapshots(b: &SolutionBundle, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let meta = spec_metadata(b.spec());
    let fields = [&b.u, &b.v, &b.w, &b.background().u0];
    let mut paths = Vec::new();
    for (name, field) in SNAPSHOT_NAMES.iter().zip(fields) {
        let path = dir.join(format!("{name}.field"));
        let mut out = BufWriter::new(File::create(&path)?);
        Snapshot::new(*name, meta.clone(), field.clone()).write_to(&mut out)?;
        out.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn cmd_solve(config: &Path, out: Option<&Path>) -> Outcome {
    let run = match load_run(config, out) {
        Ok(r) => r,
        Err(o) => return o,
    };
    if run.q_list.len() != 1 {
        return fail("solve.q: solve needs a single coupling (use sweep for lists)");
    }
    let problem = match Problem::new(run.spec.clone()) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let summary_path = run.output.dir.join("summary.json");
    let (summary, outcome) = match solve_coupled(&problem, None) {
        Err(e) => {
            eprintln!("error: {e}");
            let outcome = Outcome::of_error(&e);
            let s = Summary {
                spec: run.spec.clone(),
                outcome: format!("{outcome:?}"),
                error: Some(e.to_string()),
                solve: None,
                flux: None,
                reports: Vec::new(),
            };
            (s, outcome)
        }
        Ok(b) => {
            if let Err(e) = write_snapshots(&b, &run.output.dir) {
                return fail(e);
            }
            let reports = all_reports(&b);
            print_reports(&reports);
            let flux = check_flux(&b);
            let outcome = reports_outcome(&reports);
            let s = Summary {
                spec: run.spec.clone(),
                outcome: format!("{outcome:?}"),
                error: None,
                solve: Some(SolveSummary::from(&b)),
                flux: Some([flux.lhs[0], flux.lhs[1]]),
                reports,
            };
            println!(
                "energy {:.17e}  flux {:.17e}  newton iterations {}",
                b.energy, flux.lhs[0], b.stats.iterations
            );
            (s, outcome)
        }
    };
    if let Err(e) = write_json(&summary_path, &summary) {
        return fail(e);
    }
    outcome
}

fn table_metadata(run: &Run) -> Vec<(String, String)> {
    let spec = &run.spec;
    let t = spec.tolerances;
    let vortices = spec
        .vortices
        .vortices()
        .iter()
        .map(|v| format!("({:.17e}, {:.17e}, {})", v.x, v.y, v.multiplicity))
        .collect::<Vec<_>>()
        .join(" ");
    [
        ("model", spec.model.name().to_string()),
        ("s", format!("{:.17e}", spec.model.s())),
        ("threshold", format!("{:.17e}", spec.model.threshold())),
        ("n", spec.vortices.total_number().to_string()),
        ("vortices", vortices),
        ("sigma", format!("{:.17e}", spec.vortices.sigma())),
        ("sigma_cells", format!("{:.17e}", run.sigma_cells)),
        ("N", spec.grid.n().to_string()),
        ("L", format!("{:.17e}", spec.grid.length())),
        ("newton_tol", format!("{:.17e}", t.newton_tol)),
        ("krylov_tol", format!("{:.17e}", t.krylov_tol)),
        ("max_newton_iters", t.max_newton_iters.to_string()),
        ("bound_tol", format!("{:.17e}", spec.bound_tol())),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn write_table(table: &ConvergenceTable, dir: &Path, format: TableFormat) -> io::Result<PathBuf> {
    let (name, delim) = match format {
        TableFormat::Tsv => ("table.tsv", b'\t'),
        TableFormat::Csv => ("table.csv", b','),
        TableFormat::Json => {
            let path = dir.join("table.json");
            write_json(&path, table)?;
            return Ok(path);
        }
    };
    let path = dir.join(name);
    let mut buf = Vec::new();
    table.write_tsv(&mut buf)?;
    if delim != b'\t' {
        for b in buf.iter_mut() {
            if *b == b'\t' {
                *b = delim;
            }
        }
    }
    fs::write(&path, buf)?;
    Ok(path)
}

pub fn cmd_sweep(config: &Path, out: Option<&Path>) -> Outcome {
    let run = match load_run(config, out) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let problem = match Problem::new(run.spec.clone()) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let limit = match solve_limit(&problem) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: limit solve: {e}");
            return Outcome::of_error(&e);
        }
    };
    let mut table = match q_sweep_with_limit(&problem, &run.q_list, &limit) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    table.metadata = table_metadata(&run);
    table
        .metadata
        .push(("limit_residual".into(), format!("{:.17e}", limit.residual)));
    for format in &run.output.formats {
        match write_table(&table, &run.output.dir, *format) {
            Ok(p) => println!("wrote {}", p.display()),
            Err(e) => return fail(e),
        }
    }
    let mut outcome = Outcome::Success;
    for row in &table.rows {
        match (&row.status, row.metrics) {
            (mcs_core::diagnostics::RowStatus::Failed(msg), _) => {
                println!("q {:.17e}  FAILED  {msg}", row.q);
                outcome = outcome.worst(Outcome::SolverFailure);
            }
            (_, Some(m)) => println!(
                "q {:.17e}  d_eu {:.17e}  d_v {:.17e}  d_w {:.17e}",
                row.q, m.d_eu, m.d_v, m.d_w
            ),
            _ => {}
        }
    }
    outcome
}

/// Rebuilds the bundle stored in a set of snapshots. `u`, `v` and `w` are
/// required; a stored `u0` must match the recomputed one exactly.
pub fn load_bundle(paths: &[PathBuf]) -> Result<(SolutionBundle, Option<ScalarField>), String> {
    let mut snaps = Vec::new();
    for p in paths {
        let file = File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let s = Snapshot::read_from(BufReader::new(file)).map_err(|e| format!("{}: {e}", p.display()))?;
        snaps.push(s);
    }
    let first = snaps.first().ok_or("no snapshots given")?;
    for s in &snaps[1..] {
        if s.field.grid() != first.field.grid() {
            return Err(format!("snapshot '{}' is on a different grid", s.name));
        }
        if s.metadata != first.metadata {
            return Err(format!("snapshot '{}' belongs to a different run", s.name));
        }
    }
    let find = |name: &str| snaps.iter().find(|s| s.name == name).map(|s| s.field.clone());
    let stored: ProblemSpec =
        toml::from_str(&first.metadata).map_err(|e| format!("snapshot metadata: {e}"))?;
    if stored.grid != *first.field.grid() {
        return Err("snapshot grid disagrees with its metadata".into());
    }
    let spec = ProblemSpec::new(
        stored.model,
        stored.vortices,
        stored.q,
        stored.grid,
        stored.tolerances,
    )
    .map_err(|e| e.to_string())?;
    let problem = Problem::new(spec).map_err(|e| e.to_string())?;
    let get = |name: &str| find(name).ok_or(format!("missing snapshot '{name}'"));
    let (u, v, w) = (get("u")?, get("v")?, get("w")?);
    let bundle = SolutionBundle::assemble(problem, u, v, w).map_err(|e| e.to_string())?;
    Ok((bundle, find("u0")))
}

pub fn verify_reports(paths: &[PathBuf]) -> Result<Vec<InvariantReport>, String> {
    let (bundle, u0) = load_bundle(paths)?;
    let mut reports = all_reports(&bundle);
    if let Some(u0) = u0 {
        let diff = (&u0 - &bundle.background().u0).sup_norm();
        reports.push(InvariantReport {
            name: "u0_consistency".into(),
            lhs: vec![diff],
            rhs: vec![0.0],
            abs_discrepancy: diff,
            rel_discrepancy: diff,
            measure: mcs_core::diagnostics::Measure::Absolute,
            tolerance: 0.0,
            status: if diff == 0.0 { Status::Pass } else { Status::Fail },
        });
    }
    Ok(reports)
}

pub fn cmd_verify(paths: &[PathBuf]) -> Outcome {
    match verify_reports(paths) {
        Err(e) => fail(e),
        Ok(reports) => {
            print_reports(&reports);
            reports_outcome(&reports)
        }
    }
}

/// Sizes the global thread pool from `MCS_THREADS` when set.
pub fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("MCS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("MCS_THREADS must be a positive integer, got '{value}'"))?;
    if n == 0 {
        return Err("MCS_THREADS must be a positive integer, got '0'".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
