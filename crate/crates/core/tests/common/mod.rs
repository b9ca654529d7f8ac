//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use onspan::graph::{Demand, DirectedGraph, Distance, EdgeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: u64 = u64::MAX;

/// All-pairs shortest lengths, `INF` when unreachable.
pub fn floyd_warshall(g: &DirectedGraph, keep: impl Fn(EdgeId) -> bool) -> Vec<Vec<u64>> {
    let n = g.vertex_count();
    let mut d = vec![vec![INF; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for (id, e) in g.edges().iter().enumerate() {
        if keep(id) {
            d[e.from][e.to] = d[e.from][e.to].min(e.len);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != INF && d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub fn to_distance(v: u64) -> Distance {
    if v == INF {
        Distance::Infinite
    } else {
        Distance::Finite(v)
    }
}

pub fn fits(len: u64, d: Distance) -> bool {
    match d {
        Distance::Finite(b) => len <= b,
        Distance::Infinite => true,
    }
}

/// Every simple `s -> t` path, no pruning; filter by length afterwards.
pub fn all_simple_paths(g: &DirectedGraph, s: usize, t: usize) -> Vec<Vec<EdgeId>> {
    fn go(
        g: &DirectedGraph,
        v: usize,
        t: usize,
        seen: &mut Vec<bool>,
        stack: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
    ) {
        if v == t {
            out.push(stack.clone());
            return;
        }
        for (id, e) in g.edges().iter().enumerate() {
            if e.from == v && !seen[e.to] {
                seen[e.to] = true;
                stack.push(id);
                go(g, e.to, t, seen, stack, out);
                stack.pop();
                seen[e.to] = false;
            }
        }
    }
    let mut seen = vec![false; g.vertex_count()];
    seen[s] = true;
    let mut out = Vec::new();
    go(g, s, t, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub fn feasible_paths(g: &DirectedGraph, dem: &Demand) -> Vec<Vec<EdgeId>> {
    all_simple_paths(g, dem.s, dem.t).into_iter().filter(|p| fits(g.path_len(p), dem.d)).collect()
}

/// Exact OPT by branch and bound: include or exclude each edge in id
/// order, pruning on the incumbent and on demands that became impossible.
pub fn branch_and_bound_opt(g: &DirectedGraph, demands: &[Demand]) -> Option<usize> {
    let m = g.edge_count();
    let settled = |chosen: &[bool]| {
        let dist = floyd_warshall(g, |e| chosen[e]);
        demands.iter().all(|d| dist[d.s][d.t] != INF && fits(dist[d.s][d.t], d.d))
    };
    let possible = |allowed: &[bool]| {
        let dist = floyd_warshall(g, |e| allowed[e]);
        demands.iter().all(|d| dist[d.s][d.t] != INF && fits(dist[d.s][d.t], d.d))
    };
    let mut best: Option<usize> = None;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        m: usize,
        chosen: &mut Vec<bool>,
        allowed: &mut Vec<bool>,
        count: usize,
        best: &mut Option<usize>,
        settled: &dyn Fn(&[bool]) -> bool,
        possible: &dyn Fn(&[bool]) -> bool,
    ) {
        if best.is_some_and(|b| count >= b) {
            return;
        }
        if settled(chosen) {
            *best = Some(count);
            return;
        }
        if i == m || !possible(allowed) {
            return;
        }
        chosen[i] = true;
        rec(i + 1, m, chosen, allowed, count + 1, best, settled, possible);
        chosen[i] = false;
        allowed[i] = false;
        rec(i + 1, m, chosen, allowed, count, best, settled, possible);
        allowed[i] = true;
    }
    let mut chosen = vec![false; m];
    let mut allowed = vec![true; m];
    rec(0, m, &mut chosen, &mut allowed, 0, &mut best, &settled, &possible);
    best
}

/// Random simple digraph with lengths in `1..=max_len`, each ordered pair
/// present with probability `p`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, max_len: u64) -> DirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                edges.push((u, v, rng.random_range(1..=max_len)));
            }
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

/// Up to `k` demands between reachable pairs with slack on the distance.
pub fn random_demands(rng: &mut ChaCha8Rng, g: &DirectedGraph, k: usize) -> Vec<Demand> {
    let dist = floyd_warshall(g, |_| true);
    let n = g.vertex_count();
    let mut pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|s| (0..n).map(move |t| (s, t))).filter(|&(s, t)| s != t && dist[s][t] != INF).collect();
    let mut out = Vec::new();
    while out.len() < k && !pairs.is_empty() {
        let (s, t) = pairs.swap_remove(rng.random_range(0..pairs.len()));
        let d = dist[s][t] + rng.random_range(0..=dist[s][t]);
        out.push(Demand::new(s, t, Distance::Finite(d)).unwrap());
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
