//! Instance generation, run orchestration, JSONL round logs, auditing and
//! Monte Carlo fan-out.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{ConstraintRow, CoveringCost, CoveringError};
use crate::graph::{Demand, DirectedGraph, Direction, Distance, EdgeId, EdgeSet, GraphError};
use crate::oracles::{brute_force_opt, exact_lp_opt, OracleError};
use crate::paths::{distance_in_subgraph, shortest_distances};
use crate::spanner::{Branch, ModeKind, SpannerError, SpannerParams, SpannerRunState};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spanner(#[from] SpannerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Random digraph laid over a random Hamiltonian cycle.
    Random,
    /// Layered DAG, demands from earlier to later layers.
    Layered,
    /// Unit lengths with a direct edge for every demand.
    AllServer,
    /// Shortest-path closure of a random digraph.
    Quasimetric,
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(GraphKind::Random),
            "layered" => Ok(GraphKind::Layered),
            "allserver" | "all-server" => Ok(GraphKind::AllServer),
            "quasimetric" => Ok(GraphKind::Quasimetric),
            _ => Err(format!("unknown graph kind `{s}`")),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Random => "random",
            GraphKind::Layered => "layered",
            GraphKind::AllServer => "allserver",
            GraphKind::Quasimetric => "quasimetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub kind: GraphKind,
    pub n: usize,
    /// Edge probability in `(0, 1]`.
    pub density: f64,
    /// Number of demands wanted; fewer are produced when the graph has
    /// fewer feasible pairs.
    pub demands: usize,
    /// Lengths are drawn from `1..=max_len` (all-server ignores this).
    pub max_len: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: DirectedGraph,
    pub demands: Vec<Demand>,
}

pub fn generate(plan: &GenSpec) -> Result<Instance, HarnessError> {
    if plan.n < 2 {
        return Err(HarnessError::InvalidParameter(format!("n = {} must be at least 2", plan.n)));
    }
    if !(plan.density > 0.0 && plan.density <= 1.0) {
        return Err(HarnessError::InvalidParameter(format!("density {} must lie in (0, 1]", plan.density)));
    }
    if plan.max_len == 0 {
        return Err(HarnessError::InvalidParameter("max_len must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let n = plan.n;
    let len = |rng: &mut ChaCha8Rng| rng.random_range(1..=plan.max_len);
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    let mut has = vec![vec![false; n]; n];
    let mut add = |edges: &mut Vec<(usize, usize, u64)>, u: usize, v: usize, l: u64| {
        if u != v && !has[u][v] {
            has[u][v] = true;
            edges.push((u, v, l));
        }
    };

    match plan.kind {
        GraphKind::Random | GraphKind::AllServer | GraphKind::Quasimetric => {
            let unit = plan.kind == GraphKind::AllServer;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for i in 0..n {
                let l = if unit { 1 } else { len(&mut rng) };
                add(&mut edges, order[i], order[(i + 1) % n], l);
            }
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool(plan.density) {
                        let l = if unit { 1 } else { len(&mut rng) };
                        add(&mut edges, u, v, l);
                    }
                }
            }
        }
        GraphKind::Layered => {
            let layers = ((n as f64).sqrt().round() as usize).clamp(2, n);
            let layer_of: Vec<usize> = (0..n).map(|v| v * layers / n).collect();
            for u in 0..n {
                let next: Vec<usize> = (0..n).filter(|&v| layer_of[v] == layer_of[u] + 1).collect();
                if next.is_empty() {
                    continue;
                }
                let forced = next[rng.random_range(0..next.len())];
                let l = len(&mut rng);
                add(&mut edges, u, forced, l);
                for &v in &next {
                    if rng.random_bool(plan.density) {
                        let l = len(&mut rng);
                        add(&mut edges, u, v, l);
                    }
                }
            }
            // every vertex past the first layer gets an in-edge
            for v in 0..n {
                if layer_of[v] == 0 || edges.iter().any(|e| e.1 == v) {
                    continue;
                }
                let prev: Vec<usize> = (0..n).filter(|&u| layer_of[u] + 1 == layer_of[v]).collect();
                let u = prev[rng.random_range(0..prev.len())];
                let l = len(&mut rng);
                add(&mut edges, u, v, l);
            }
        }
    }

    let mut graph = DirectedGraph::new(n, edges.iter().copied())?;
    if plan.kind == GraphKind::Quasimetric {
        graph = metric_closure(&graph)?;
    }

    let mut pairs = Vec::new();
    for s in 0..n {
        let dist = shortest_distances(&graph, s, Direction::Out)?;
        for (t, d) in dist.iter().enumerate() {
            if t != s && d.is_finite() {
                pairs.push((s, t, d.finite().expect("finite")));
            }
        }
    }
    pairs.shuffle(&mut rng);
    pairs.truncate(plan.demands);

    let mut demands = Vec::with_capacity(pairs.len());
    for (s, t, dist) in pairs {
        let d = match plan.kind {
            GraphKind::AllServer => Distance::Finite(rng.random_range(1..=3)),
            _ => Distance::Finite(dist + rng.random_range(0..=dist.max(1))),
        };
        demands.push(Demand::new(s, t, d)?);
    }
    if plan.kind == GraphKind::AllServer {
        let mut extra: Vec<(usize, usize, u64)> = graph.edges().iter().map(|e| (e.from, e.to, e.len)).collect();
        for d in &demands {
            if graph.find_edge(d.s, d.t).is_none() && !extra.iter().any(|e| e.0 == d.s && e.1 == d.t) {
                extra.push((d.s, d.t, 1));
            }
        }
        graph = DirectedGraph::new(n, extra)?;
    }
    Ok(Instance { graph, demands })
}

/// Edge `u -> v` with length `dist(u, v)` for every reachable pair.
pub fn metric_closure(g: &DirectedGraph) -> Result<DirectedGraph, GraphError> {
    let n = g.vertex_count();
    let mut edges = Vec::new();
    for u in 0..n {
        let dist = shortest_distances(g, u, Direction::Out)?;
        for (v, d) in dist.iter().enumerate() {
            if v != u {
                if let Some(l) = d.finite() {
                    edges.push((u, v, l));
                }
            }
        }
    }
    DirectedGraph::new(n, edges)
}

/// Directed triangle closure: for edges `u -> v` and `v -> w` with `u != w`
/// there is an edge `u -> w` no longer than the two combined.
pub fn is_quasimetric(g: &DirectedGraph) -> bool {
    g.edges().iter().all(|a| {
        g.out_edges(a.to).iter().all(|&b| {
            let b = g.edge(b);
            b.to == a.from || g.find_edge(a.from, b.to).is_some_and(|c| g.edge(c).len <= a.len + b.len)
        })
    })
}

/// One line of the JSONL round log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RunLine {
    Round(RunRecord),
    Summary(RunSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub round: usize,
    pub s: usize,
    pub t: usize,
    pub d: String,
    pub branch: Branch,
    pub edges_added: usize,
    pub spanner_edges: usize,
    pub lp_objective: f64,
    pub fixes: usize,
    pub settled: bool,
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: ModeKind,
    pub seed: u64,
    pub threshold: usize,
    pub thickness: f64,
    pub rounds: usize,
    pub spanner_edges: usize,
    pub lp_objective: f64,
    /// `lp_objective / (16 ln(2|E|))`, a lower bound on the LP optimum and
    /// hence on OPT.
    pub lp_lower_bound: f64,
    pub ratio_vs_lp_bound: Option<f64>,
    pub repairs: usize,
    pub fixes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_vs_opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<String>,
    /// Edge ids of the final spanner.
    pub spanner: Vec<EdgeId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run the brute-force and exact LP oracles at the end.
    pub exact: bool,
    /// Add per-round wall time (makes output non-reproducible).
    pub timing: bool,
}

pub fn lp_lower_bound(lp_objective: f64, edge_count: usize) -> f64 {
    if edge_count == 0 {
        return 0.0;
    }
    lp_objective / (16.0 * (2.0 * edge_count as f64).ln())
}

/// Runs the online algorithm over the whole demand stream.
pub fn run_instance(
    g: &DirectedGraph,
    demands: &[Demand],
    params: SpannerParams,
    opts: RunOptions,
) -> Result<Vec<RunLine>, HarnessError> {
    let mut state = SpannerRunState::new(g, params)?;
    let mut lines = Vec::with_capacity(demands.len() + 1);
    for dem in demands {
        let start = Instant::now();
        let out = state.process_demand(dem)?;
        let wall_us = opts.timing.then(|| start.elapsed().as_micros() as u64);
        lines.push(RunLine::Round(RunRecord {
            round: out.round,
            s: dem.s,
            t: dem.t,
            d: dem.d.to_string(),
            branch: out.branch,
            edges_added: out.edges_added,
            spanner_edges: out.spanner_edges,
            lp_objective: out.lp_objective,
            fixes: out.fixes,
            settled: out.settled,
            repaired: out.repaired,
            wall_us,
        }));
    }

    let spanner_edges = state.spanner().len();
    let lp_objective = state.covering().objective();
    let lb = lp_lower_bound(lp_objective, g.edge_count());
    let mut summary = RunSummary {
        mode: params.mode.kind(),
        seed: params.seed,
        threshold: params.threshold,
        thickness: params.thickness,
        rounds: demands.len(),
        spanner_edges,
        lp_objective,
        lp_lower_bound: lb,
        ratio_vs_lp_bound: (lb > 0.0).then(|| spanner_edges as f64 / lb),
        repairs: state.log().iter().filter(|o| o.repaired).count(),
        fixes: state.log().iter().map(|o| o.fixes).sum(),
        opt: None,
        lp_opt: None,
        ratio_vs_opt: None,
        exact_error: None,
        spanner: state.spanner().iter().collect(),
    };
    if opts.exact {
        let effective: Vec<Demand> = demands.iter().map(|d| state.effective(d)).collect();
        match (brute_force_opt(g, &effective), exact_lp_opt(g, &effective)) {
            (Ok(opt), Ok(lp)) => {
                summary.opt = Some(opt);
                summary.lp_opt = Some(lp);
                summary.ratio_vs_opt = (opt > 0).then(|| spanner_edges as f64 / opt as f64);
            }
            (Err(e), _) | (_, Err(e)) => summary.exact_error = Some(e.to_string()),
        }
    }
    lines.push(RunLine::Summary(summary));
    Ok(lines)
}

pub fn to_jsonl(lines: &[RunLine]) -> Result<String, HarnessError> {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<RunLine>, HarnessError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(HarnessError::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rounds: usize,
    pub spanner_edges: usize,
    pub ratio_vs_opt: Option<f64>,
    pub ratio_vs_lp_bound: Option<f64>,
    /// One message per failed audit check.
    pub failures: Vec<String>,
}

impl EvalReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Audits a round log against its instance: record shape, monotone `|E'|`,
/// every demand settled by the final spanner, and ratios against the best
/// available lower bound.
pub fn evaluate(
    lines: &[RunLine],
    g: &DirectedGraph,
    demands: &[Demand],
    exact: bool,
) -> Result<EvalReport, HarnessError> {
    let mut failures = Vec::new();
    let records: Vec<&RunRecord> = lines
        .iter()
        .filter_map(|l| match l {
            RunLine::Round(r) => Some(r),
            RunLine::Summary(_) => None,
        })
        .collect();
    let summaries: Vec<&RunSummary> = lines
        .iter()
        .filter_map(|l| match l {
            RunLine::Summary(s) => Some(s),
            RunLine::Round(_) => None,
        })
        .collect();
    let Some(summary) = (summaries.len() == 1).then(|| summaries[0]) else {
        return Err(HarnessError::Parse {
            line: lines.len(),
            msg: format!("expected one summary, found {}", summaries.len()),
        });
    };

    if records.len() != demands.len() {
        failures.push(format!("{} round records for {} demands", records.len(), demands.len()));
    }
    let mut last = 0;
    for (i, r) in records.iter().enumerate() {
        if r.round != i + 1 {
            failures.push(format!("record {} has round {}", i + 1, r.round));
        }
        if r.spanner_edges < last {
            failures.push(format!("round {}: |E'| fell from {last} to {}", r.round, r.spanner_edges));
        }
        last = r.spanner_edges;
        if !r.settled {
            failures.push(format!("round {}: demand reported unsettled", r.round));
        }
        if let Some(dem) = demands.get(i) {
            if (r.s, r.t, r.d.as_str()) != (dem.s, dem.t, dem.d.to_string().as_str()) {
                failures.push(format!("round {}: record does not match demand {} {} {}", r.round, dem.s, dem.t, dem.d));
            }
        }
    }

    let spanner = match EdgeSet::from_ids(g.edge_count(), summary.spanner.iter().copied()) {
        Ok(set) => set,
        Err(e) => {
            failures.push(format!("summary edge list: {e}"));
            EdgeSet::empty(g.edge_count())
        }
    };
    if spanner.len() != summary.spanner_edges {
        failures.push(format!("summary lists {} edges but reports |E'| = {}", spanner.len(), summary.spanner_edges));
    }
    if last != summary.spanner_edges {
        failures.push(format!("last round has |E'| = {last}, summary has {}", summary.spanner_edges));
    }
    let steiner = summary.mode == ModeKind::SteinerForest;
    for dem in demands {
        let target = if steiner { Distance::Infinite } else { dem.d };
        let got = distance_in_subgraph(g, &spanner, dem.s, dem.t)?;
        if !got.within(target) {
            failures.push(format!("demand {} -> {} unsettled: distance {got} > {target}", dem.s, dem.t));
        }
    }

    let mut ratio_vs_opt = summary.ratio_vs_opt;
    if exact {
        let effective: Vec<Demand> =
            demands.iter().map(|d| if steiner { Demand { d: Distance::Infinite, ..*d } } else { *d }).collect();
        let opt = brute_force_opt(g, &effective)?;
        if opt > spanner.len() && failures.is_empty() {
            failures.push(format!("brute-force OPT {opt} exceeds a feasible spanner of size {}", spanner.len()));
        }
        ratio_vs_opt = (opt > 0).then(|| spanner.len() as f64 / opt as f64);
    }
    let lb = lp_lower_bound(summary.lp_objective, g.edge_count());
    let ratio_vs_lp_bound = (lb > 0.0).then(|| spanner.len() as f64 / lb);
    for (name, r) in [("OPT", ratio_vs_opt), ("LP bound", ratio_vs_lp_bound)] {
        if let Some(r) = r {
            if r < 1.0 - 1e-9 && failures.is_empty() {
                failures.push(format!("ratio vs {name} is {r} < 1"));
            }
        }
    }
    Ok(EvalReport { rounds: records.len(), spanner_edges: spanner.len(), ratio_vs_opt, ratio_vs_lp_bound, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub mean_edges: f64,
    pub min_edges: usize,
    pub max_edges: usize,
    pub repairs: usize,
    /// `inclusion[i][e]`: fraction of runs with `e` in `E'` after round `i+1`.
    pub inclusion: Vec<Vec<f64>>,
    /// `marginals[i][e]`: `p^{i+1}_e`, identical across runs.
    pub marginals: Vec<Vec<f64>>,
    /// Edges placed by a deterministic step in at least one run.
    pub ever_forced: Vec<EdgeId>,
}

struct SingleRun {
    edges: usize,
    repairs: usize,
    inclusion: Vec<Vec<bool>>,
    marginals: Vec<Vec<f64>>,
    forced: Vec<bool>,
}

/// Runs one independent stream per seed in parallel.
pub fn monte_carlo(
    g: &DirectedGraph,
    demands: &[Demand],
    params: SpannerParams,
    seeds: std::ops::Range<u64>,
) -> Result<MonteCarloReport, HarnessError> {
    let runs: Vec<SingleRun> = seeds
        .into_par_iter()
        .map(|seed| -> Result<SingleRun, SpannerError> {
            let mut st = SpannerRunState::new(g, SpannerParams { seed, ..params })?;
            let mut inclusion = Vec::with_capacity(demands.len());
            let mut marginals = Vec::with_capacity(demands.len());
            for d in demands {
                st.process_demand(d)?;
                inclusion.push((0..g.edge_count()).map(|e| st.spanner().contains(e)).collect());
                marginals.push(st.marginals().to_vec());
            }
            Ok(SingleRun {
                edges: st.spanner().len(),
                repairs: st.log().iter().filter(|o| o.repaired).count(),
                inclusion,
                marginals,
                forced: (0..g.edge_count()).map(|e| st.forced_edges().contains(e)).collect(),
            })
        })
        .collect::<Result<_, _>>()?;

    let k = runs.len();
    let m = g.edge_count();
    if k == 0 {
        return Ok(MonteCarloReport {
            runs: 0,
            mean_edges: 0.0,
            min_edges: 0,
            max_edges: 0,
            repairs: 0,
            inclusion: Vec::new(),
            marginals: Vec::new(),
            ever_forced: Vec::new(),
        });
    }
    let mut inclusion = vec![vec![0.0; m]; demands.len()];
    for run in &runs {
        for (acc, row) in inclusion.iter_mut().zip(&run.inclusion) {
            for (a, &b) in acc.iter_mut().zip(row) {
                if b {
                    *a += 1.0;
                }
            }
        }
    }
    for row in &mut inclusion {
        for v in row {
            *v /= k as f64;
        }
    }
    Ok(MonteCarloReport {
        runs: k,
        mean_edges: runs.iter().map(|r| r.edges as f64).sum::<f64>() / k as f64,
        min_edges: runs.iter().map(|r| r.edges).min().unwrap_or(0),
        max_edges: runs.iter().map(|r| r.edges).max().unwrap_or(0),
        repairs: runs.iter().map(|r| r.repairs).sum(),
        inclusion,
        marginals: runs[0].marginals.clone(),
        ever_forced: (0..m).filter(|&e| runs.iter().any(|r| r.forced[e])).collect(),
    })
}

/// Sparse LP instance: line 1 the variable (or row) count, line 2 the
/// positive costs (or bounds), then one `idx:coef ...` line per streamed
/// row (or column).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub cost: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
}

pub fn parse_sparse_instance(text: &str) -> Result<SparseInstance, HarnessError> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let perr = |line: usize, msg: &str| HarnessError::Parse { line, msg: msg.to_string() };
    let (ln, first) = lines.next().ok_or_else(|| perr(1, "missing dimension line"))?;
    let n: usize = first.parse().map_err(|_| perr(ln, "dimension must be a positive integer"))?;
    if n == 0 {
        return Err(perr(ln, "dimension must be a positive integer"));
    }
    let (ln, second) = lines.next().ok_or_else(|| perr(ln + 1, "missing cost line"))?;
    let cost: Vec<f64> = second
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|_| perr(ln, &format!("bad number `{v}`"))))
        .collect::<Result<_, _>>()?;
    if cost.len() != n {
        return Err(perr(ln, &format!("expected {n} costs, found {}", cost.len())));
    }
    CoveringCost::new(cost.clone()).map_err(|e| perr(ln, &e.to_string()))?;
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let mut entries = Vec::new();
        for tok in line.split_whitespace() {
            let (i, a) = tok.split_once(':').ok_or_else(|| perr(ln, &format!("entry `{tok}` is not idx:coef")))?;
            let i: usize = i.parse().map_err(|_| perr(ln, &format!("bad index `{i}`")))?;
            let a: f64 = a.parse().map_err(|_| perr(ln, &format!("bad coefficient `{a}`")))?;
            entries.push((i, a));
        }
        let row = ConstraintRow::new(entries).map_err(|e| perr(ln, &e.to_string()))?;
        row.check_range(n).map_err(|e| perr(ln, &e.to_string()))?;
        rows.push(row);
    }
    Ok(SparseInstance { cost, rows })
}
