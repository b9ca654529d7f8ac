//! Exact desk-scale ground truth: brute-force spanner OPT, exact LP values
//! by path enumeration, and the offline covering LP optimum.

use thiserror::Error;

use crate::covering::{ConstraintRow, CoveringCost};
use crate::graph::{Demand, DirectedGraph, Direction, Distance, EdgeId, EdgeSet, GraphError, VertexId};
use crate::paths::{is_settled, shortest_distances};
use crate::simplex::{Cmp, DenseLp, LpError, Sense};

/// Largest number of paths any enumeration may produce.
pub const PATH_LIMIT: usize = 10_000;
/// Largest number of candidate edges the subset enumeration accepts.
pub const BRUTE_FORCE_EDGE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} exceeds the enumeration limit of {limit}")]
    SizeLimit { what: &'static str, limit: usize },
    #[error("instance is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("lp solver: {0}")]
    Lp(LpError),
}

impl From<LpError> for OracleError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Infeasible => OracleError::Infeasible,
            LpError::Unbounded => OracleError::Unbounded,
            other => OracleError::Lp(other),
        }
    }
}

/// All simple `s -> t` paths of length at most `d`, as edge-id sequences in
/// depth-first order (out-edges by ascending id).
pub fn enumerate_paths(g: &DirectedGraph, dem: &Demand) -> Result<Vec<Vec<EdgeId>>, OracleError> {
    dem.validate(g)?;
    let to_t = shortest_distances(g, dem.t, Direction::In)?;
    let mut out = Vec::new();
    let mut on_path = vec![false; g.vertex_count()];
    let mut stack = Vec::new();
    on_path[dem.s] = true;
    dfs(g, dem, &to_t, dem.s, 0, &mut on_path, &mut stack, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    g: &DirectedGraph,
    dem: &Demand,
    to_t: &[Distance],
    v: VertexId,
    len: u64,
    on_path: &mut [bool],
    stack: &mut Vec<EdgeId>,
    out: &mut Vec<Vec<EdgeId>>,
) -> Result<(), OracleError> {
    if v == dem.t {
        if out.len() == PATH_LIMIT {
            return Err(OracleError::SizeLimit { what: "path count", limit: PATH_LIMIT });
        }
        out.push(stack.clone());
        return Ok(());
    }
    for &e in g.out_edges(v) {
        let edge = g.edge(e);
        if on_path[edge.to] {
            continue;
        }
        let reach = len + edge.len;
        if !to_t[edge.to].plus(reach).within(dem.d) {
            continue;
        }
        on_path[edge.to] = true;
        stack.push(e);
        dfs(g, dem, to_t, edge.to, reach, on_path, stack, out)?;
        stack.pop();
        on_path[edge.to] = false;
    }
    Ok(())
}

/// Edges lying on some length-feasible path of some demand. Any minimal
/// spanner uses only these.
pub fn relevant_edges(g: &DirectedGraph, demands: &[Demand]) -> Result<EdgeSet, OracleError> {
    let mut set = EdgeSet::empty(g.edge_count());
    for dem in demands {
        dem.validate(g)?;
        let from_s = shortest_distances(g, dem.s, Direction::Out)?;
        let to_t = shortest_distances(g, dem.t, Direction::In)?;
        if !from_s[dem.t].within(dem.d) {
            return Err(OracleError::Infeasible);
        }
        for (id, e) in g.edges().iter().enumerate() {
            if (from_s[e.from] + to_t[e.to]).plus(e.len).within(dem.d) {
                set.insert(id);
            }
        }
    }
    Ok(set)
}

/// Minimum number of edges settling every demand, by enumerating candidate
/// subsets in order of size.
pub fn brute_force_opt(g: &DirectedGraph, demands: &[Demand]) -> Result<usize, OracleError> {
    let candidates: Vec<EdgeId> = relevant_edges(g, demands)?.iter().collect();
    if candidates.len() > BRUTE_FORCE_EDGE_LIMIT {
        return Err(OracleError::SizeLimit { what: "candidate edge count", limit: BRUTE_FORCE_EDGE_LIMIT });
    }
    if demands.is_empty() {
        return Ok(0);
    }
    let m = candidates.len();
    for size in 1..=m {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let set = EdgeSet::from_ids(g.edge_count(), idx.iter().map(|&i| candidates[i]))?;
            if settles_all(g, &set, demands)? {
                return Ok(size);
            }
            if !next_combination(&mut idx, m) {
                break;
            }
        }
    }
    Err(OracleError::Infeasible)
}

fn settles_all(g: &DirectedGraph, set: &EdgeSet, demands: &[Demand]) -> Result<bool, GraphError> {
    for dem in demands {
        if !is_settled(g, set, dem)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Optimum of the path-based spanner LP relaxation: minimize `sum x_e`
/// subject to one unit of path flow per demand with per-demand edge loads
/// bounded by `x`.
pub fn exact_lp_opt(g: &DirectedGraph, demands: &[Demand]) -> Result<f64, OracleError> {
    if demands.is_empty() {
        return Ok(0.0);
    }
    let edges: Vec<EdgeId> = relevant_edges(g, demands)?.iter().collect();
    let mut per_demand = Vec::with_capacity(demands.len());
    let mut total = 0;
    for dem in demands {
        let paths = enumerate_paths(g, dem)?;
        total += paths.len();
        if total > PATH_LIMIT {
            return Err(OracleError::SizeLimit { what: "path count", limit: PATH_LIMIT });
        }
        per_demand.push(paths);
    }

    let nx = edges.len();
    let nvars = nx + total;
    let mut objective = vec![0.0; nvars];
    objective[..nx].fill(1.0);
    let mut lp = DenseLp::new(Sense::Minimize, objective);
    let mut offset = nx;
    for paths in &per_demand {
        let mut cover = vec![0.0; nvars];
        cover[offset..offset + paths.len()].fill(1.0);
        lp.add_row(cover, Cmp::Ge, 1.0);
        for (k, &e) in edges.iter().enumerate() {
            let mut row = vec![0.0; nvars];
            let mut any = false;
            for (p, path) in paths.iter().enumerate() {
                if path.contains(&e) {
                    row[offset + p] = 1.0;
                    any = true;
                }
            }
            if any {
                row[k] = -1.0;
                lp.add_row(row, Cmp::Le, 0.0);
            }
        }
        offset += paths.len();
    }
    Ok(lp.solve()?.objective)
}

/// Maximum fractional path flow from `s` to `t` over length-feasible paths
/// under edge capacities `x`.
pub fn exact_flow_value(g: &DirectedGraph, x: &[f64], dem: &Demand) -> Result<f64, OracleError> {
    assert_eq!(x.len(), g.edge_count(), "capacity vector length");
    let paths = enumerate_paths(g, dem)?;
    if paths.is_empty() {
        return Ok(0.0);
    }
    let mut lp = DenseLp::new(Sense::Maximize, vec![1.0; paths.len()]);
    for (e, &cap) in x.iter().enumerate() {
        let row: Vec<f64> = paths.iter().map(|p| if p.contains(&e) { 1.0 } else { 0.0 }).collect();
        if row.iter().any(|&a| a > 0.0) {
            lp.add_row(row, Cmp::Le, cap);
        }
    }
    Ok(lp.solve()?.objective)
}

/// Offline optimum of `min <c, x>` subject to `<a_i, x> >= 1` and `x >= 0`.
pub fn exact_covering_lp(c: &CoveringCost, rows: &[ConstraintRow]) -> Result<f64, OracleError> {
    Ok(covering_lp(c, rows).solve()?.objective)
}

/// The dense form of the offline covering LP, for callers that want to
/// solve it themselves (for example in exact rational arithmetic).
pub fn covering_lp(c: &CoveringCost, rows: &[ConstraintRow]) -> DenseLp<f64> {
    let n = c.len();
    let mut lp = DenseLp::new(Sense::Minimize, c.as_slice().to_vec());
    for row in rows {
        lp.add_row(row.to_dense(n), Cmp::Ge, 1.0);
    }
    lp
}
