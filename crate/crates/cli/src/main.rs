use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use onspan::covering::{CoveringCost, CoveringError, CoveringState};
use onspan::graph::{demands_to_text, parse_demands, DirectedGraph, GraphError};
use onspan::harness::{
    evaluate, generate, monte_carlo, parse_jsonl, parse_sparse_instance, run_instance, to_jsonl, GenSpec, GraphKind,
    HarnessError, RunLine, RunOptions,
};
use onspan::oracles::{exact_covering_lp, OracleError};
use onspan::packing::{PackingError, PackingState};
use onspan::separation::SeparationError;
use onspan::spanner::{params_for, ModeKind, SpannerError, SpannerParams};

#[derive(Parser)]
#[command(name = "onspan", version, about = "Online covering/packing LPs and online directed spanners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph file and a demand stream.
    Gen(GenArgs),
    /// Run the online spanner over a demand stream, writing JSONL.
    Run(RunArgs),
    /// Audit a run log against its instance.
    Eval(EvalArgs),
    /// Run many seeds in parallel and aggregate.
    Montecarlo(MonteCarloArgs),
    /// Stream a covering LP through the online covering engine.
    Cover(CoverArgs),
    /// Stream a packing LP through the online packing engine.
    Pack(PackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Layered,
    Allserver,
    Quasimetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    General,
    BoundedD,
    Quasimetric,
    AllServer,
    SteinerForest,
}

impl From<Mode> for ModeKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::General => ModeKind::General,
            Mode::BoundedD => ModeKind::BoundedD,
            Mode::Quasimetric => ModeKind::Quasimetric,
            Mode::AllServer => ModeKind::AllServer,
            Mode::SteinerForest => ModeKind::SteinerForest,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Number of demands.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    max_len: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Graph output file.
    #[arg(long)]
    graph: PathBuf,
    /// Demand stream output file.
    #[arg(long)]
    demands: PathBuf,
}

#[derive(Args)]
struct SpannerArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    demands: PathBuf,
    #[arg(long, value_enum, default_value = "general")]
    mode: Mode,
    /// Distance bound for bounded-d mode.
    #[arg(long)]
    d: Option<u64>,
    /// Epsilon for steiner-forest mode.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the round threshold T.
    #[arg(long)]
    threshold: Option<usize>,
    /// Override the thickness t.
    #[arg(long)]
    thickness: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spanner: SpannerArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare against brute-force OPT and the exact LP (tiny instances).
    #[arg(long)]
    exact: bool,
    /// Record per-round wall time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// JSONL output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL produced by `run`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    demands: PathBuf,
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    spanner: SpannerArgs,
    #[arg(long, default_value_t = 100)]
    runs: u64,
    /// First seed; runs use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Also solve the offline LP and report the ratio.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    /// Report y scaled by B/B', which satisfies every packing row.
    #[arg(long)]
    scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status 2 marks bad or infeasible input, 1 an internal failure.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }

    fn internal(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<SpannerError> for Failure {
    fn from(e: SpannerError) -> Self {
        let code = match &e {
            SpannerError::InvalidParameter(_)
            | SpannerError::InfeasibleDemand { .. }
            | SpannerError::Graph(_)
            | SpannerError::Separation(SeparationError::InfeasibleDemand { .. }) => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Infeasible | OracleError::SizeLimit { .. } | OracleError::Graph(_) => {
                Failure::input(e.to_string())
            }
            other => Failure::internal(other.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Spanner(e) => e.into(),
            HarnessError::Oracle(e) => e.into(),
            HarnessError::Covering(e) => e.into(),
            HarnessError::InvalidParameter(_)
            | HarnessError::Parse { .. }
            | HarnessError::Graph(_)
            | HarnessError::Json(_) => Failure::input(e.to_string()),
        }
    }
}

impl From<CoveringError> for Failure {
    fn from(e: CoveringError) -> Self {
        match e {
            CoveringError::OracleContract { .. } | CoveringError::FixLimit(_) => Failure::internal(e.to_string()),
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<PackingError> for Failure {
    fn from(e: PackingError) -> Self {
        Failure::input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::internal(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::internal(format!("stdout: {e}"))),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn load_instance(a: &SpannerArgs) -> Result<(DirectedGraph, Vec<onspan::Demand>), Failure> {
    let g = DirectedGraph::parse(&read(&a.graph)?)?;
    let demands = parse_demands(&read(&a.demands)?)?;
    for d in &demands {
        d.validate(&g)?;
    }
    Ok((g, demands))
}

fn spanner_params(a: &SpannerArgs, n: usize, seed: u64) -> Result<SpannerParams, Failure> {
    let mut p = params_for(a.mode.into(), n, a.d, a.epsilon, seed)?;
    if let Some(t) = a.threshold {
        p.threshold = t;
    }
    if let Some(t) = a.thickness {
        p.thickness = t;
    }
    p.validate()?;
    Ok(p)
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let kind = match a.kind {
        Kind::Random => GraphKind::Random,
        Kind::Layered => GraphKind::Layered,
        Kind::Allserver => GraphKind::AllServer,
        Kind::Quasimetric => GraphKind::Quasimetric,
    };
    let plan = GenSpec { kind, n: a.n, density: a.density, demands: a.k, max_len: a.max_len, seed: a.seed };
    let inst = generate(&plan)?;
    write_out(Some(&a.graph), &inst.graph.to_text())?;
    write_out(Some(&a.demands), &demands_to_text(&inst.demands))?;
    eprintln!(
        "generated {kind} graph: {} vertices, {} edges, {} demands",
        inst.graph.vertex_count(),
        inst.graph.edge_count(),
        inst.demands.len()
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let (g, demands) = load_instance(&a.spanner)?;
    let params = spanner_params(&a.spanner, g.vertex_count(), a.seed)?;
    let lines = run_instance(&g, &demands, params, RunOptions { exact: a.exact, timing: a.timing })?;
    write_out(a.out.as_deref(), &to_jsonl(&lines)?)?;
    if let Some(RunLine::Summary(s)) = lines.last() {
        eprintln!(
            "rounds {}  |E'| {}  LP objective {:.4}  LP lower bound {:.4}  repairs {}",
            s.rounds, s.spanner_edges, s.lp_objective, s.lp_lower_bound, s.repairs
        );
        if let (Some(opt), Some(lp)) = (s.opt, s.lp_opt) {
            eprintln!("OPT {opt}  exact LP {lp:.4}  |E'|/OPT {:.3}", s.ratio_vs_opt.unwrap_or(f64::NAN));
        }
        if let Some(e) = &s.exact_error {
            eprintln!("exact comparison skipped: {e}");
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let g = DirectedGraph::parse(&read(&a.graph)?)?;
    let demands = parse_demands(&read(&a.demands)?)?;
    let lines = parse_jsonl(&read(&a.run)?)?;
    let report = evaluate(&lines, &g, &demands, a.exact)?;
    let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "rounds {}  |E'| {}  ratio vs OPT {}  ratio vs LP bound {}",
        report.rounds,
        report.spanner_edges,
        fmt(report.ratio_vs_opt),
        fmt(report.ratio_vs_lp_bound)
    );
    if report.passed() {
        println!("audit: ok");
        Ok(())
    } else {
        for f in &report.failures {
            println!("audit failure: {f}");
        }
        Err(Failure::internal(format!("audit failed with {} problem(s)", report.failures.len())))
    }
}

fn cmd_montecarlo(a: MonteCarloArgs) -> Result<(), Failure> {
    let (g, demands) = load_instance(&a.spanner)?;
    let params = spanner_params(&a.spanner, g.vertex_count(), a.seed)?;
    let end = a.seed.checked_add(a.runs).ok_or_else(|| Failure::input("seed range overflows"))?;
    let report = monte_carlo(&g, &demands, params, a.seed..end)?;
    write_out(a.out.as_deref(), &(json(&report) + "\n"))?;
    eprintln!(
        "runs {}  mean |E'| {:.3}  min {}  max {}  repairs {}",
        report.runs, report.mean_edges, report.min_edges, report.max_edges, report.repairs
    );
    Ok(())
}

fn cmd_cover(a: CoverArgs) -> Result<(), Failure> {
    let inst = parse_sparse_instance(&read(&a.instance)?)?;
    let cost = CoveringCost::new(inst.cost.clone())?;
    let mut state = CoveringState::new(cost.clone());
    let mut out = String::new();
    for (i, row) in inst.rows.iter().enumerate() {
        let rep = state.process(row)?;
        out.push_str(&json(&serde_json::json!({
            "type": "row",
            "row": i + 1,
            "violated": rep.violated,
            "phases_started": rep.phases_started,
            "y": rep.y_assigned,
            "doubled": rep.variables_doubled,
            "objective": state.objective(),
        })));
        out.push('\n');
    }
    let mut summary = serde_json::json!({
        "type": "summary",
        "rows": inst.rows.len(),
        "objective": state.objective(),
        "phases": state.phases().len(),
        "fixes": state.fixes(),
        "initial_alpha": state.initial_alpha(),
        "alpha": state.current_alpha(),
        "x": state.solution(),
    });
    if a.exact {
        let opt = if inst.rows.is_empty() { 0.0 } else { exact_covering_lp(&cost, &inst.rows)? };
        summary["lp_opt"] = serde_json::json!(opt);
        let bound = 16.0 * (2.0 * cost.len() as f64).ln();
        summary["ratio"] = serde_json::json!(if opt > 0.0 { Some(state.objective() / opt) } else { None });
        eprintln!("offline optimum {opt:.6}  online {:.6}  guarantee factor {bound:.3}", state.objective());
    }
    out.push_str(&json(&summary));
    out.push('\n');
    write_out(a.out.as_deref(), &out)?;
    eprintln!(
        "rows {}  objective {:.6}  phases {}  fixes {}",
        inst.rows.len(),
        state.objective(),
        state.phases().len(),
        state.fixes()
    );
    Ok(())
}

fn cmd_pack(a: PackArgs) -> Result<(), Failure> {
    let inst = parse_sparse_instance(&read(&a.instance)?)?;
    let mut state = PackingState::new(inst.cost.clone(), a.b)?;
    let mut out = String::new();
    for (i, col) in inst.rows.iter().enumerate() {
        let y = state.process_column(col)?;
        out.push_str(&json(&serde_json::json!({ "type": "column", "column": i + 1, "y": y })));
        out.push('\n');
    }
    let rep = state.report();
    let load_bound: Vec<f64> = (0..inst.cost.len()).map(|j| state.load_bound(j)).collect();
    let mut summary = serde_json::json!({
        "type": "summary",
        "columns": inst.rows.len(),
        "objective": rep.objective,
        "covering_objective": rep.covering_objective,
        "violation": rep.violation,
        "load": state.load(),
        "load_bound": load_bound,
        "b": a.b,
        "b_prime": rep.b_prime,
        "alpha": rep.alpha,
        "y": state.y(),
    });
    if a.scale {
        summary["scaled_y"] = serde_json::json!(state.scaled_y());
    }
    out.push_str(&json(&summary));
    out.push('\n');
    write_out(a.out.as_deref(), &out)?;
    eprintln!(
        "columns {}  Y {:.6}  X {:.6}  B' {:.4}",
        inst.rows.len(),
        rep.objective,
        rep.covering_objective,
        rep.b_prime
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Cover(a) => cmd_cover(a),
        Command::Pack(a) => cmd_pack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
