//! Separation oracle turning the path-based spanner LP into an online
//! covering LP over edge capacities `x`.
//!
//! For a demand `i` with feasible path family `P_i`, the capacity vector is
//! good when every `z >= 0` with `sum_{e in P} z_e >= 1` for all `P in P_i`
//! has `<x, z> >= 1`. A bad `x` is certified by such a `z`, which becomes a
//! covering row. The minimizing `z` is found by cutting planes: solve the
//! LP over a working path set, then look for a length-feasible path whose
//! `z`-weight is below one with an exact layered DP.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::covering::{ConstraintRow, CoveringError, CoveringState};
use crate::graph::{Demand, DirectedGraph, Direction, Distance, EdgeId, GraphError, VertexId};
use crate::paths::shortest_distances;
use crate::simplex::{Cmp, DenseLp, LpError, Sense};

/// `x` counts as good once `min <x, z>` reaches `1 - GOOD_TOL`.
pub const GOOD_TOL: f64 = 1e-7;
/// Hard cap on the cutting-plane working set.
pub const WORKING_SET_LIMIT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeparationError {
    #[error("demand {s} -> {t} has no path of length at most {d}")]
    InfeasibleDemand { s: VertexId, t: VertexId, d: Distance },
    #[error("cutting-plane working set exceeded {0} paths")]
    WorkingSetLimit(usize),
    #[error("cutting plane stalled: path already in the working set came back with weight {0}")]
    Stalled(f64),
    #[error("capacity vector has length {got}, graph has {expected} edges")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("lp solver: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// A `z` in the feasible region of the dual path LP of one demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingConstraint {
    pub round: usize,
    /// One entry per edge id.
    pub z: Vec<f64>,
    /// `<x, z>` for the capacities it was computed against.
    pub value: f64,
}

impl SeparatingConstraint {
    pub fn to_row(&self) -> Result<ConstraintRow, CoveringError> {
        ConstraintRow::new(self.z.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(e, &v)| (e, v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Good { value: f64 },
    Violated(SeparatingConstraint),
}

/// Minimum `z`-weight of an `s -> t` path with length at most `d`, with one
/// such path (simple, edge ids in order). `None` when no feasible path
/// exists.
pub fn restricted_min_weight_path(
    g: &DirectedGraph,
    z: &[f64],
    dem: &Demand,
) -> Result<Option<(f64, Vec<EdgeId>)>, GraphError> {
    dem.validate(g)?;
    assert_eq!(z.len(), g.edge_count(), "weight vector length");
    let n = g.vertex_count();
    // no simple path is longer than this, so larger bounds change nothing
    let cap = (n as u64 - 1).saturating_mul(g.max_len());
    let bound = match dem.d {
        Distance::Finite(d) if d < cap => d as usize,
        _ => return Ok(plain_min_weight_path(g, z, dem.s, dem.t)),
    };

    let mut w = vec![vec![f64::INFINITY; n]; bound + 1];
    let mut par: Vec<Vec<Option<EdgeId>>> = vec![vec![None; n]; bound + 1];
    w[0][dem.s] = 0.0;
    for level in 0..=bound {
        settle_layer(g, z, &mut w[level], &mut par[level], |e| g.edge(e).len == 0);
        for v in 0..n {
            let wv = w[level][v];
            if wv == f64::INFINITY {
                continue;
            }
            for &e in g.out_edges(v) {
                let edge = g.edge(e);
                if edge.len == 0 {
                    continue;
                }
                let next = level + edge.len as usize;
                if next > bound {
                    continue;
                }
                let cand = wv + z[e];
                if cand < w[next][edge.to] {
                    w[next][edge.to] = cand;
                    par[next][edge.to] = Some(e);
                }
            }
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for (level, row) in w.iter().enumerate() {
        if row[dem.t] < best.map_or(f64::INFINITY, |b| b.0) {
            best = Some((row[dem.t], level));
        }
    }
    let Some((_, level)) = best else { return Ok(None) };

    let mut walk = Vec::new();
    let (mut v, mut lv) = (dem.t, level);
    while let Some(e) = par[lv][v] {
        walk.push(e);
        let edge = g.edge(e);
        lv -= edge.len as usize;
        v = edge.from;
    }
    debug_assert_eq!((v, lv), (dem.s, 0));
    walk.reverse();
    let path = remove_cycles(g, dem.s, &walk);
    let weight = path.iter().map(|&e| z[e]).sum();
    Ok(Some((weight, path)))
}

/// Dijkstra on `z` over all edges, ignoring lengths.
fn plain_min_weight_path(g: &DirectedGraph, z: &[f64], s: VertexId, t: VertexId) -> Option<(f64, Vec<EdgeId>)> {
    let n = g.vertex_count();
    let mut w = vec![f64::INFINITY; n];
    let mut par = vec![None; n];
    w[s] = 0.0;
    settle_layer(g, z, &mut w, &mut par, |_| true);
    if w[t] == f64::INFINITY {
        return None;
    }
    let mut path = Vec::new();
    let mut v = t;
    while let Some(e) = par[v] {
        path.push(e);
        v = g.edge(e).from;
    }
    path.reverse();
    let path = remove_cycles(g, s, &path);
    let weight = path.iter().map(|&e| z[e]).sum();
    Some((weight, path))
}

/// Array Dijkstra from every labelled vertex along the edges accepted by
/// `usable`. Ties go to the smaller vertex id.
fn settle_layer<F: Fn(EdgeId) -> bool>(
    g: &DirectedGraph,
    z: &[f64],
    w: &mut [f64],
    par: &mut [Option<EdgeId>],
    usable: F,
) {
    let n = w.len();
    let mut done = vec![false; n];
    loop {
        let mut pick: Option<VertexId> = None;
        for v in 0..n {
            if !done[v] && w[v] < f64::INFINITY && pick.is_none_or(|p| w[v] < w[p]) {
                pick = Some(v);
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        for &e in g.out_edges(u) {
            if !usable(e) {
                continue;
            }
            let to = g.edge(e).to;
            let cand = w[u] + z[e];
            if !done[to] && cand < w[to] {
                w[to] = cand;
                par[to] = Some(e);
            }
        }
    }
}

/// Drops closed sub-walks so every vertex appears once.
fn remove_cycles(g: &DirectedGraph, s: VertexId, walk: &[EdgeId]) -> Vec<EdgeId> {
    let mut out: Vec<EdgeId> = Vec::with_capacity(walk.len());
    let mut pos = vec![usize::MAX; g.vertex_count()];
    pos[s] = 0;
    for &e in walk {
        let to = g.edge(e).to;
        if pos[to] != usize::MAX {
            let keep = pos[to];
            for &dropped in &out[keep..] {
                pos[g.edge(dropped).to] = usize::MAX;
            }
            out.truncate(keep);
            pos[to] = keep;
        } else {
            out.push(e);
            pos[to] = out.len();
        }
    }
    out
}

/// Decides whether `x` is good for `dem`, returning a certificate `z`
/// otherwise.
pub fn separate(g: &DirectedGraph, x: &[f64], dem: &Demand, round: usize) -> Result<Separation, SeparationError> {
    if x.len() != g.edge_count() {
        return Err(SeparationError::Shape { expected: g.edge_count(), got: x.len() });
    }
    dem.validate(g)?;
    let from_s = shortest_distances(g, dem.s, Direction::Out)?;
    if !from_s[dem.t].within(dem.d) {
        return Err(SeparationError::InfeasibleDemand { s: dem.s, t: dem.t, d: dem.d });
    }

    let m = g.edge_count();
    let mut working: Vec<Vec<EdgeId>> = Vec::new();
    let mut seen: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
    let mut z = vec![0.0; m];
    loop {
        let (weight, path) = restricted_min_weight_path(g, &z, dem)?.expect("feasibility checked above");
        if weight >= 1.0 - GOOD_TOL {
            break;
        }
        if !seen.insert(path.clone()) {
            return Err(SeparationError::Stalled(weight));
        }
        working.push(path);
        if working.len() > WORKING_SET_LIMIT {
            return Err(SeparationError::WorkingSetLimit(WORKING_SET_LIMIT));
        }
        z = min_cover_weights(x, &working, m)?;
    }

    let value: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
    if value >= 1.0 - GOOD_TOL {
        Ok(Separation::Good { value })
    } else {
        Ok(Separation::Violated(SeparatingConstraint { round, z, value }))
    }
}

/// `argmin <x, z>` subject to every working path having `z`-weight at
/// least one.
fn min_cover_weights(x: &[f64], working: &[Vec<EdgeId>], m: usize) -> Result<Vec<f64>, LpError> {
    let support: Vec<EdgeId> = working.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut col = vec![usize::MAX; m];
    for (k, &e) in support.iter().enumerate() {
        col[e] = k;
    }
    let mut lp = DenseLp::new(Sense::Minimize, support.iter().map(|&e| x[e]).collect());
    for path in working {
        let mut row = vec![0.0; support.len()];
        for &e in path {
            row[col[e]] = 1.0;
        }
        lp.add_row(row, Cmp::Ge, 1.0);
    }
    let sol = lp.solve()?;
    let mut z = vec![0.0; m];
    for (k, &e) in support.iter().enumerate() {
        z[e] = sol.x[k].max(0.0);
    }
    Ok(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSolve {
    /// Covering rows fed to the engine this round.
    pub fixes: usize,
    /// Capacity vector after the round.
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Raises the covering solution until `x` is good for `dem`. The covering
/// state must have one unit-cost variable per edge.
pub fn solve_round(
    cov: &mut CoveringState,
    g: &DirectedGraph,
    dem: &Demand,
    round: usize,
) -> Result<RoundSolve, SeparationError> {
    if cov.num_vars() != g.edge_count() {
        return Err(SeparationError::Shape { expected: g.edge_count(), got: cov.num_vars() });
    }
    let mut failure = None;
    let fixes = cov.process_with_oracle(|x| match separate(g, x, dem, round) {
        Ok(Separation::Good { .. }) => None,
        Ok(Separation::Violated(sep)) => match sep.to_row() {
            Ok(row) => Some(row),
            Err(e) => {
                failure = Some(e.into());
                None
            }
        },
        Err(e) => {
            failure = Some(e);
            None
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RoundSolve { fixes, x: cov.solution().to_vec(), objective: cov.objective() })
}
