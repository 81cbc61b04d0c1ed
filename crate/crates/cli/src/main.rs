//! `prospect`: prox evaluation, TREX solves and the experiment harnesses.

mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prospect::experiments::{run_phase_transition, run_scaling_benchmark, ExperimentTable};
use prospect::perspective::PerspectiveKind;
use prospect::selftest::{run_all, SuiteConfig, SuiteReport};
use prospect::solvers::{DRConfig, Relaxation};
use prospect::trex::{solve_trex_dr_sel, solve_trex_full, TrexProblem};
use prospect::{Error, ProxStep};
use serde_json::{json, Value};

use crate::config::{load_json, PhaseFile, ProxFile, ScalingFile, TrexFile};

#[derive(Parser)]
#[command(
    name = "prospect",
    version,
    about = "Perspective proxes, Douglas-Rachford and generalized TREX"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one perspective prox and print it as JSON.
    ProxEval(ProxArgs),
    /// Solve a generalized TREX problem.
    Trex(TrexArgs),
    /// Support-recovery phase transition over the rescaled sample size.
    PhaseTransition(PhaseArgs),
    /// Timing of plain DR against DR-Sel on one column.
    Scaling(ScalingArgs),
    /// Oracle and property suites for every prox kind.
    ProxSelftest(SelftestArgs),
}

/// Overrides for the Douglas-Rachford settings.
#[derive(Args, Default)]
struct SolverFlags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverFlags {
    fn apply(&self, c: &mut DRConfig) {
        if let Some(g) = self.gamma {
            c.gamma = g;
        }
        if let Some(mu) = self.mu {
            c.relaxation = Relaxation::Constant(mu);
        }
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(m) = self.max_iter {
            c.max_iter = m;
        }
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ProxArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// One value, or one per block for `separable`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Option<Vec<f64>>,
    /// Comma-separated; blocks are concatenated for `separable`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v: Option<Vec<f64>>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `cosh` or `power` (radial and distance-ball kinds).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    /// Inner kind of `separable`, as JSON (e.g. `{"kind":"huber","rho":1}`).
    #[arg(long)]
    inner: Option<String>,
    /// Ambient block length of `separable` (1 + dimension of each y block).
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrexArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Design matrix, headerless CSV with n rows and p columns.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Response, single-column CSV.
    #[arg(long)]
    z: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    /// Use DR-Sel with this warm-up length instead of solving both signs.
    #[arg(long)]
    dr_sel: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output directory for `result.json` and `solution.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    /// CSV path; a JSON twin with the resolved config is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    oracle_draws: Option<usize>,
    #[arg(long)]
    pair_draws: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) => Failure::validation(e.to_string()),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn init_logging() -> CliResult<()> {
    let level = match std::env::var("PROSPECT_LOG").as_deref() {
        Err(_) | Ok("quiet") => log::LevelFilter::Warn,
        Ok("info") => log::LevelFilter::Info,
        Ok("trace") => log::LevelFilter::Trace,
        Ok(other) => {
            return Err(Failure::validation(format!(
                "PROSPECT_LOG must be quiet, info or trace, got {other:?}"
            )))
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    Ok(())
}

fn prox_eval(args: ProxArgs) -> CliResult<()> {
    let mut file: ProxFile = load_json(args.config.as_deref())?;
    let prox = file.prox.get_or_insert_with(|| json!({}));
    let obj = prox
        .as_object_mut()
        .ok_or_else(|| Failure::validation("\"prox\" must be an object"))?;
    let mut set = |key: &str, value: Option<Value>| {
        if let Some(v) = value {
            obj.insert(key.to_string(), v);
        }
    };
    set("kind", args.kind.map(Value::from));
    set("alpha", args.alpha.map(Value::from));
    set("q", args.q.map(Value::from));
    set("delta", args.delta.map(Value::from));
    set("v", args.v.map(Value::from));
    set("rho", args.rho.map(Value::from));
    set("epsilon", args.epsilon.map(Value::from));
    set("profile", args.profile.map(Value::from));
    set("exponent", args.exponent.map(Value::from));
    set("scale", args.scale.map(Value::from));
    set("block", args.block.map(Value::from));
    if let Some(inner) = args.inner {
        let v: Value = serde_json::from_str(&inner)
            .map_err(|e| Failure::validation(format!("--inner: {e}")))?;
        set("inner", Some(v));
    }
    if args.gamma.is_some() {
        file.gamma = args.gamma;
    }
    if args.eta.is_some() {
        file.eta = args.eta;
    }
    if args.y.is_some() {
        file.y = args.y;
    }
    let kind_json = file.prox.clone().unwrap_or_default();
    if kind_json.get("kind").is_none() {
        return Err(Failure::validation(format!(
            "--kind is required, one of {}",
            PerspectiveKind::NAMES.join(", ")
        )));
    }
    let kind: PerspectiveKind = serde_json::from_value(kind_json)
        .map_err(|e| Failure::validation(format!("invalid prox parameters: {e}")))?;
    kind.validate()?;
    let gamma = file
        .gamma
        .ok_or_else(|| Failure::validation("--gamma is required"))?;
    let step = ProxStep::new(gamma)?;
    let eta = file
        .eta
        .clone()
        .ok_or_else(|| Failure::validation("--eta is required"))?;
    let y = file
        .y
        .clone()
        .ok_or_else(|| Failure::validation("--y is required"))?;

    let (flat, blocks) = match &kind {
        PerspectiveKind::Separable { block, .. } => {
            let width = block - 1;
            if y.len() != eta.len() * width {
                return Err(Failure::validation(format!(
                    "separable with block {block} needs {} y values for {} eta values, got {}",
                    eta.len() * width,
                    eta.len(),
                    y.len()
                )));
            }
            let flat: Vec<f64> = eta
                .iter()
                .zip(y.chunks(width))
                .flat_map(|(e, c)| std::iter::once(*e).chain(c.iter().copied()))
                .collect();
            (flat, Some(*block))
        }
        _ => {
            if eta.len() != 1 {
                return Err(Failure::validation(
                    "--eta takes a single value for this kind",
                ));
            }
            (
                std::iter::once(eta[0]).chain(y.iter().copied()).collect(),
                None,
            )
        }
    };
    let out = kind.prox_flat(step, &flat)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Failure::numerical(format!(
            "prox produced a non-finite value: {out:?}"
        )));
    }
    let input = json!({ "prox": kind, "gamma": gamma, "eta": eta, "y": y });
    let result = match blocks {
        Some(b) => {
            let etas: Vec<f64> = out.chunks(b).map(|c| c[0]).collect();
            let ys: Vec<Vec<f64>> = out.chunks(b).map(|c| c[1..].to_vec()).collect();
            json!({ "eta": etas, "y": ys, "input": input })
        }
        None => json!({ "eta": out[0], "y": out[1..].to_vec(), "input": input }),
    };
    io::emit(
        args.out.as_deref(),
        &format!("{}\n", serde_json::to_string(&result).expect("JSON value")),
    )
}

fn trex(args: TrexArgs) -> CliResult<()> {
    let mut file: TrexFile = load_json(args.config.as_deref())?;
    if let Some(p) = args.x {
        file.x = Some(p);
    }
    if let Some(p) = args.z {
        file.z = Some(p);
    }
    if let Some(a) = args.alpha {
        file.alpha = a;
    }
    if let Some(q) = args.q {
        file.q = q;
    }
    if let Some(w) = args.parallel {
        file.workers = w;
    }
    if let Some(k) = args.dr_sel {
        file.dr_sel_k0 = Some(k);
    }
    if let Some(out) = args.out {
        file.out = Some(out);
    }
    if let (Some(seed), Some(model)) = (args.seed, file.model.as_mut()) {
        model.seed = seed;
    }
    args.solver.apply(&mut file.solver);
    file.solver.validate()?;
    if file.workers == 0 {
        return Err(Failure::validation("--parallel must be at least 1"));
    }
    let (x, z, b_star) = match (&file.x, &file.z, &file.model) {
        (Some(xp), Some(zp), None) => (io::read_matrix(xp)?, io::read_vector(zp)?, None),
        (None, None, Some(spec)) => {
            let m = prospect::experiments::gen_linear_model(spec)?;
            (m.x, m.z, Some(m.b_star))
        }
        _ => {
            return Err(Failure::validation(
                "give either --x and --z, or a \"model\" block in the config",
            ))
        }
    };
    let problem = TrexProblem::new(x, z, file.alpha, file.q)?;
    let result = match file.dr_sel_k0 {
        Some(k0) => solve_trex_dr_sel(&problem, &file.solver, k0, file.workers)?,
        None => solve_trex_full(&problem, &file.solver, file.workers)?,
    };
    let out_dir = file
        .out
        .clone()
        .ok_or_else(|| Failure::validation("--out is required"))?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::validation(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut echo = serde_json::to_value(&file).expect("config serializes");
    if let Some(obj) = echo.as_object_mut() {
        obj.remove("out");
        obj.remove("workers");
    }
    let mut doc = json!({ "config": echo, "result": result });
    if let Some(b) = b_star {
        doc["b_star"] = json!(b.as_slice());
    }
    io::write_file(
        &out_dir.join("result.json"),
        &format!("{}\n", serde_json::to_string_pretty(&doc).expect("JSON")),
    )?;
    let mut csv = String::from("index,value\n");
    for (i, v) in result.b_hat.iter().enumerate() {
        csv.push_str(&format!(
            "{},{}\n",
            i + 1,
            prospect::experiments::format_value(*v)
        ));
    }
    io::write_file(&out_dir.join("solution.csv"), &csv)?;
    if result.converged {
        Ok(())
    } else {
        Err(Failure::numerical(format!(
            "winning subproblem (j={}, s={:+}) did not converge; best iterate written",
            result.winner.j, result.winner.s
        )))
    }
}

fn write_table(
    out: Option<&std::path::Path>,
    table: &ExperimentTable,
    config: Value,
) -> CliResult<()> {
    match out {
        Some(path) => {
            io::write_file(path, &table.to_csv_string())?;
            let doc = json!({ "config": config, "results": table.to_json() });
            io::write_file(
                &path.with_extension("json"),
                &format!("{}\n", serde_json::to_string_pretty(&doc).expect("JSON")),
            )
        }
        None => io::emit(None, &table.to_csv_string()),
    }
}

fn phase_transition(args: PhaseArgs) -> CliResult<()> {
    let file: PhaseFile = load_json(args.config.as_deref())?;
    let mut c = file.0;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(w) = args.parallel {
        c.workers = w;
    }
    if let Some(t) = args.theta {
        c.theta_grid = t;
    }
    if let Some(q) = args.q {
        c.q_list = q;
    }
    if let Some(a) = args.alpha {
        c.alpha_grid = a;
    }
    if let Some(r) = args.repetitions {
        c.repetitions = r;
    }
    args.solver.apply(&mut c.solver);
    c.validate()?;
    let table = run_phase_transition(&c)?;
    let mut echo = serde_json::to_value(&c).expect("config serializes");
    echo.as_object_mut().map(|o| o.remove("workers"));
    write_table(args.out.as_deref(), &table, echo)
}

fn scaling(args: ScalingArgs) -> CliResult<()> {
    let file: ScalingFile = load_json(args.config.as_deref())?;
    let mut c = file.0;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(w) = args.parallel {
        c.workers = w;
    }
    if let Some(d) = args.dims {
        c.dims = d;
    }
    if let Some(r) = args.repetitions {
        c.repetitions = r;
    }
    if let Some(a) = args.alpha {
        c.alpha = a;
    }
    if let Some(q) = args.q {
        c.q = q;
    }
    args.solver.apply(&mut c.solver);
    c.validate()?;
    let table = run_scaling_benchmark(&c)?;
    let mut echo = serde_json::to_value(&c).expect("config serializes");
    echo.as_object_mut().map(|o| o.remove("workers"));
    write_table(args.out.as_deref(), &table, echo)
}

fn selftest_table(reports: &[SuiteReport], seed: u64) -> ExperimentTable {
    let mut t = ExperimentTable::new();
    for r in reports {
        let id = format!("suite={};kind={}", r.suite, r.kind);
        t.push(id.clone(), seed, "draws", r.draws as f64);
        t.push(id.clone(), seed, "max_violation", r.max_violation);
        t.push(id.clone(), seed, "tolerance", r.tolerance);
        t.push(id, seed, "passed", f64::from(u8::from(r.passed)));
    }
    t
}

fn prox_selftest(args: SelftestArgs) -> CliResult<()> {
    let mut c: SuiteConfig = load_json(args.config.as_deref())?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(d) = args.oracle_draws {
        c.oracle_draws = d;
    }
    if let Some(d) = args.pair_draws {
        c.pair_draws = d;
    }
    let reports = run_all(&c);
    let table = selftest_table(&reports, c.seed);
    for r in &reports {
        log::info!(
            "{} {}: max violation {:e} (tolerance {:e})",
            r.suite,
            r.kind,
            r.max_violation,
            r.tolerance
        );
    }
    write_table(
        args.out.as_deref(),
        &table,
        serde_json::to_value(&c).expect("config serializes"),
    )?;
    let failed: Vec<&SuiteReport> = reports.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        let worst = serde_json::to_string(&failed).expect("reports serialize");
        Err(Failure::numerical(format!(
            "{} suite(s) failed: {worst}",
            failed.len()
        )))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    init_logging()?;
    match cli.command {
        Command::ProxEval(a) => prox_eval(a),
        Command::Trex(a) => trex(a),
        Command::PhaseTransition(a) => phase_transition(a),
        Command::Scaling(a) => scaling(a),
        Command::ProxSelftest(a) => prox_selftest(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
