//! Command-line front end: `verify`, `bridge` and `oracle-compare`.
//!
//! Every input is validated and every computation finishes before the output
//! directory is touched, so a bad config or a failed solve leaves no files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::bounds::report::{decay_csv, float_value, format_float, object, reports_json, summary_csv, to_canonical_json};
use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::measures::{Joint, Support};
use crate::model::{BackendKind, Model};
use crate::moments::{cond_cov, cond_mean, Field};
use crate::quadratic::Quadratic;
use crate::sinkhorn::{sinkhorn_step, solve_bridge, trajectory, trajectory_csv, Bridge, Potential, TrajectoryRow};
use crate::suites::{oracle_compare, run_suite, Suite};

/// Environment variable capping the worker pool.
pub const THREADS_VAR: &str = "BRIDGEBOUND_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bridgebound", version, about = "Sinkhorn bridges and numerical certificates for entropic continuity bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a verification suite and write reports.
    Verify(Args),
    /// Solve one bridge and dump potentials, conditional moments and the trajectory.
    Bridge(Args),
    /// Compare a Gaussian model against its grid discretization.
    OracleCompare(Args),
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// theorem1 | lemma | corollaries | decay | pi_bounds | potentials | all
    /// (continuity, coupling and moment_decay are accepted as aliases)
    #[arg(long)]
    pub suite: Option<String>,
    /// JSON model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub instances: Option<usize>,
    /// Sinkhorn stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Exit status for each error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } | Error::Support(_) | Error::Size { .. } => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let pool = thread_pool()?;
    pool.install(|| match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Bridge(a) => cmd_bridge(a),
        Command::OracleCompare(a) => cmd_oracle_compare(a),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_model(args: &Args) -> Result<Option<Model>> {
    let Some(path) = &args.model else {
        if args.tol.is_some() {
            return Err(Error::Config("--tol needs --model".into()));
        }
        return Ok(None);
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut model = Model::from_json(&text)?;
    if let Some(t) = args.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
        model.tol = Some(t);
    }
    Ok(Some(model))
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn cmd_verify(args: &Args) -> Result<i32> {
    let model = load_model(args)?;
    let name = args
        .suite
        .clone()
        .or_else(|| model.as_ref().and_then(|m| m.suite.clone()))
        .ok_or_else(|| Error::Config("no suite selected (use --suite or a \"suite\" key)".into()))?;
    let suite: Suite = name.parse()?;
    if args.instances == Some(0) {
        return Err(Error::Config("--instances must be at least 1".into()));
    }
    let out = run_suite(suite, model.as_ref(), args.seed, args.instances)?;

    let mut files = vec![("reports.json".to_string(), reports_json(&out.reports)), ("summary.csv".to_string(), summary_csv(&out.reports))];
    match out.curves.as_slice() {
        [] => {}
        [(_, c)] => files.push(("decay.csv".into(), decay_csv(c))),
        many => files.extend(many.iter().map(|(label, c)| (format!("decay_{label}.csv"), decay_csv(c)))),
    }
    write_files(&args.out, &files)?;

    let counted: Vec<&BoundReport> = out.reports.iter().filter(|r| !r.degenerate).collect();
    let failed: Vec<&&BoundReport> = counted.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        eprintln!("FAIL {} lhs={} rhs={} slack={}", r.name, format_float(r.lhs), format_float(r.rhs), format_float(r.slack));
    }
    println!(
        "{}: {} reports, {} failed, {} degenerate",
        name,
        out.reports.len(),
        failed.len(),
        out.reports.len() - counted.len()
    );
    Ok(if failed.is_empty() { 0 } else { 1 })
}

fn quadratic_json(q: &Quadratic) -> Value {
    object(vec![
        ("a", matrix_json(&q.a)),
        ("b", vector_json(&q.b)),
        ("c", float_value(q.c)),
    ])
}

fn vector_json(v: &Vector) -> Value {
    Value::Array(v.iter().map(|&x| float_value(x)).collect())
}

fn matrix_json(m: &Matrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| float_value(m[(i, j)])).collect())).collect())
}

fn bridge_json(model: &Model, bridge: &Bridge) -> Value {
    let mut fields = vec![
        ("backend", Value::String(format!("{:?}", model.backend).to_lowercase())),
        ("iterations", Value::from(bridge.iterations)),
        ("residual", float_value(bridge.residual)),
        ("system_residual", float_value(bridge.system_residual)),
    ];
    if let Joint::Gaussian(j) = bridge.joint() {
        let (u, v) = bridge.potentials();
        fields.push(("mean", vector_json(j.mean())));
        fields.push(("cov", matrix_json(j.cov())));
        if let (Some(u), Some(v)) = (u.as_quadratic(), v.as_quadratic()) {
            fields.push(("u", quadratic_json(u)));
            fields.push(("v", quadratic_json(v)));
        }
    }
    object(fields)
}

/// Potentials and conditional moment fields at the grid nodes, one row per node.
fn fields_csv(support: &Support, bridge: &Bridge) -> Result<String> {
    let (u, v) = bridge.potentials();
    let uv = values(&u, support)?;
    let vv = values(&v, support)?;
    let l = bridge.kernel()?;
    let lf = bridge.conjugate_kernel()?;
    let cols: Vec<(&str, Field)> =
        vec![("m", cond_mean(&l)), ("sigma", cond_cov(&l)), ("m_conj", cond_mean(&lf)), ("sigma_conj", cond_cov(&lf))];
    let mats = cols.iter().map(|(_, f)| f.materialize(support)).collect::<Result<Vec<_>>>()?;
    let d = support.dim();

    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.push("U".into());
    header.push("V".into());
    for ((name, _), m) in cols.iter().zip(&mats) {
        let shape = m.values()[0].shape();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                if shape.1 == 1 {
                    header.push(format!("{name}{i}"));
                } else if j >= i {
                    header.push(format!("{name}{i}{j}"));
                }
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for (idx, x) in support.points().iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|&c| format_float(c)).collect();
        row.push(format_float(uv[idx]));
        row.push(format_float(vv[idx]));
        for m in &mats {
            let a = &m.values()[idx];
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    if a.ncols() == 1 || j >= i {
                        row.push(format_float(a[(i, j)]));
                    }
                }
            }
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

fn values(p: &Potential, support: &Support) -> Result<Vector> {
    p.values_on(support)
}

fn cmd_bridge(args: &Args) -> Result<i32> {
    let model = load_model(args)?.unwrap_or_else(|| Model::default_1d(BackendKind::Gaussian));
    let problem = model.problem()?;
    let bridge = solve_bridge(&problem, model.solve_options())?;

    // States are streamed so long runs never hold every iterate at once.
    let mut rows: Vec<TrajectoryRow> = Vec::with_capacity(bridge.iterations + 1);
    let mut state = problem.initial_state()?;
    loop {
        rows.extend(trajectory(std::slice::from_ref(&state), Some(&bridge))?);
        if state.n() >= bridge.iterations {
            break;
        }
        state = sinkhorn_step(&problem, &state)?;
    }

    let json = to_canonical_json(&bridge_json(&model, &bridge));
    let mut files = vec![("bridge.json".to_string(), json.clone()), ("trajectory.csv".to_string(), trajectory_csv(&rows))];
    if let Some(layout) = &model.grid {
        files.push(("fields.csv".into(), fields_csv(&Support::from_layout(layout.clone()), &bridge)?));
    }
    write_files(&args.out, &files)?;
    print!("{json}");
    Ok(0)
}

fn cmd_oracle_compare(args: &Args) -> Result<i32> {
    let model = load_model(args)?.unwrap_or_else(|| Model::default_1d(BackendKind::Grid));
    let report = oracle_compare(&model)?;
    let json = to_canonical_json(&report.to_json());
    write_files(&args.out, &[("oracle.json".to_string(), json.clone())])?;
    print!("{json}");
    Ok(if report.pass() { 0 } else { 1 })
}
