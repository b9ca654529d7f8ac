//! Exact path primitives: hop-bounded length tables, cheapest feasible
//! paths, local graphs, shortest-path arborescences and subgraph distances.

use std::collections::BinaryHeap;

use crate::graph::{Demand, DirectedGraph, Direction, Distance, EdgeId, EdgeSet, GraphError, HeapItem, VertexId};

/// `minlen[v][h]`: minimum length of a walk between the source and `v`
/// using at most `h` edges, for `h = 0..n-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopProfile {
    source: VertexId,
    direction: Direction,
    // rows indexed by hop budget, columns by vertex
    rows: Vec<Vec<Distance>>,
}

impl HopProfile {
    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Largest hop budget in the table (`n - 1`).
    pub fn max_hops(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// Budgets beyond `n - 1` are clamped; a shortest walk never needs more.
    pub fn at(&self, v: VertexId, hops: usize) -> Distance {
        let h = hops.min(self.max_hops());
        self.rows[h][v]
    }
}

/// Bellman-Ford by hop layers.
pub fn hop_length_profile(g: &DirectedGraph, source: VertexId, direction: Direction) -> Result<HopProfile, GraphError> {
    g.check_vertex(source)?;
    let n = g.vertex_count();
    let mut first = vec![Distance::Infinite; n];
    first[source] = Distance::ZERO;
    let mut rows = Vec::with_capacity(n);
    rows.push(first);
    for _ in 1..n {
        let prev = rows.last().expect("at least one row");
        let mut next = prev.clone();
        for e in g.edges() {
            // Out: source ~> e.from -> e.to ; In: e.from -> e.to ~> source
            let (near, far) = match direction {
                Direction::Out => (e.from, e.to),
                Direction::In => (e.to, e.from),
            };
            let cand = prev[near].plus(e.len);
            if cand < next[far] {
                next[far] = cand;
            }
        }
        rows.push(next);
    }
    Ok(HopProfile { source, direction, rows })
}

/// Minimum-hop `s ~> t` path of total length at most `d`, ties broken by the
/// lexicographically smallest edge-id sequence. `None` when no path meets
/// the bound. An unbounded `d` yields a plain minimum-hop path.
pub fn cheapest_feasible_path(
    g: &DirectedGraph,
    s: VertexId,
    t: VertexId,
    d: Distance,
) -> Result<Option<Vec<EdgeId>>, GraphError> {
    g.check_vertex(s)?;
    g.check_vertex(t)?;
    if s == t {
        return Ok(Some(Vec::new()));
    }
    let to_t = hop_length_profile(g, t, Direction::In)?;
    let Some(hops) = (0..g.vertex_count()).find(|&h| to_t.at(s, h).within(d)) else {
        return Ok(None);
    };

    // Walk forward picking the smallest edge id that still admits a
    // completion within the remaining hop and length budget. Every
    // completion has exactly `hops` edges since `hops` is minimal.
    let mut path = Vec::with_capacity(hops);
    let mut at = s;
    let mut used = 0u64;
    for left in (1..=hops).rev() {
        let next = g
            .out_edges(at)
            .iter()
            .copied()
            .find(|&e| {
                let edge = g.edge(e);
                let rest = to_t.at(edge.to, left - 1).plus(used).plus(edge.len);
                rest.within(d)
            })
            .expect("hop profile guarantees a feasible continuation");
        used += g.edge(next).len;
        at = g.edge(next).to;
        path.push(next);
    }
    debug_assert_eq!(at, t);
    Ok(Some(path))
}

/// Dijkstra over the edges accepted by `keep`. Returns distances and the
/// parent edge of every reached vertex other than the root. Equal-distance
/// ties keep the first parent found; pops are ordered by vertex id.
fn dijkstra<F>(g: &DirectedGraph, root: VertexId, dir: Direction, keep: F) -> (Vec<Distance>, Vec<Option<EdgeId>>)
where
    F: Fn(EdgeId) -> bool,
{
    let n = g.vertex_count();
    let mut dist = vec![Distance::Infinite; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[root] = Distance::ZERO;
    heap.push(HeapItem { dist: 0, vertex: root });
    while let Some(HeapItem { dist: du, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in g.incident(u, dir) {
            if !keep(e) {
                continue;
            }
            let v = g.far_end(e, dir);
            let cand = Distance::Finite(du).plus(g.edge(e).len);
            if cand < dist[v] {
                dist[v] = cand;
                parent[v] = Some(e);
                if let Distance::Finite(c) = cand {
                    heap.push(HeapItem { dist: c, vertex: v });
                }
            }
        }
    }
    (dist, parent)
}

/// Single-source shortest distances (to `source` when `dir` is `In`).
pub fn shortest_distances(g: &DirectedGraph, source: VertexId, dir: Direction) -> Result<Vec<Distance>, GraphError> {
    g.check_vertex(source)?;
    Ok(dijkstra(g, source, dir, |_| true).0)
}

/// Vertices lying on some `s ~> t` walk of length at most `d`:
/// `{ v : dist(s, v) + dist(v, t) <= d }`, sorted.
pub fn local_graph(g: &DirectedGraph, dem: &Demand) -> Result<Vec<VertexId>, GraphError> {
    dem.validate(g)?;
    let from_s = shortest_distances(g, dem.s, Direction::Out)?;
    let to_t = shortest_distances(g, dem.t, Direction::In)?;
    Ok((0..g.vertex_count()).filter(|&v| (from_s[v] + to_t[v]).within(dem.d)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Thickness {
    Thick,
    Thin,
}

/// Thick iff the local graph has at least `t_param` vertices.
pub fn classify_thickness(g: &DirectedGraph, dem: &Demand, t_param: f64) -> Result<Thickness, GraphError> {
    if !(t_param.is_finite() && t_param > 0.0) {
        return Err(GraphError::InvalidParameter(format!("thickness must be positive, got {t_param}")));
    }
    let size = local_graph(g, dem)?.len();
    Ok(if size as f64 >= t_param { Thickness::Thick } else { Thickness::Thin })
}

/// Shortest-path out-arborescence (`Out`) or in-arborescence (`In`) rooted
/// at `root`, spanning every vertex reachable in that direction.
pub fn shortest_path_arborescence(g: &DirectedGraph, root: VertexId, dir: Direction) -> Result<EdgeSet, GraphError> {
    g.check_vertex(root)?;
    let (_, parent) = dijkstra(g, root, dir, |_| true);
    let mut set = EdgeSet::empty(g.edge_count());
    set.extend(parent.into_iter().flatten());
    Ok(set)
}

/// Shortest `s ~> t` length using only edges in `edges`.
pub fn distance_in_subgraph(
    g: &DirectedGraph,
    edges: &EdgeSet,
    s: VertexId,
    t: VertexId,
) -> Result<Distance, GraphError> {
    g.check_vertex(s)?;
    g.check_vertex(t)?;
    let (dist, _) = dijkstra(g, s, Direction::Out, |e| edges.contains(e));
    Ok(dist[t])
}

/// True when `edges` meets the demand's distance target.
pub fn is_settled(g: &DirectedGraph, edges: &EdgeSet, dem: &Demand) -> Result<bool, GraphError> {
    Ok(distance_in_subgraph(g, edges, dem.s, dem.t)?.within(dem.d))
}
