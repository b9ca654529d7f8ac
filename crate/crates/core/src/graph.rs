//! Directed graphs with integer edge lengths, terminal-pair demands and edge
//! subsets.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    InvalidVertex { vertex: VertexId, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(VertexId, VertexId),
    #[error("edge id {0} out of range")]
    InvalidEdge(EdgeId),
    #[error("demand endpoints coincide at vertex {0}")]
    DegenerateDemand(VertexId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A path length, or the unreachable sentinel.
///
/// `Infinite` orders after every finite value and absorbs addition, so DP
/// sums never overflow into a misleading finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Distance {
    Finite(u64),
    Infinite,
}

impl Distance {
    pub const ZERO: Distance = Distance::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(v) => Some(v),
            Distance::Infinite => None,
        }
    }

    /// Adds an edge length; saturates to `Infinite` on overflow.
    pub fn plus(self, len: u64) -> Distance {
        match self {
            Distance::Finite(v) => v.checked_add(len).map_or(Distance::Infinite, Distance::Finite),
            Distance::Infinite => Distance::Infinite,
        }
    }

    /// True when `self` meets the bound `target` (an `Infinite` target
    /// accepts every finite distance, but never an infinite one).
    pub fn within(self, target: Distance) -> bool {
        match (self, target) {
            (Distance::Infinite, _) => false,
            (Distance::Finite(_), Distance::Infinite) => true,
            (Distance::Finite(a), Distance::Finite(b)) => a <= b,
        }
    }
}

impl Add for Distance {
    type Output = Distance;

    fn add(self, rhs: Distance) -> Distance {
        match rhs {
            Distance::Finite(v) => self.plus(v),
            Distance::Infinite => Distance::Infinite,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(v) => write!(f, "{v}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Distance::Infinite);
        }
        s.parse::<u64>()
            .map(Distance::Finite)
            .map_err(|_| format!("expected a non-negative integer or `inf`, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub len: u64,
}

/// Which way paths run relative to a root vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Paths leaving the root (out-arborescence, forward distances).
    Out,
    /// Paths entering the root (in-arborescence, reverse distances).
    In,
}

/// A simple directed graph with non-negative integer edge lengths.
///
/// Edge ids are assigned in insertion order and never change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
    index: BTreeMap<(VertexId, VertexId), EdgeId>,
}

impl DirectedGraph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (VertexId, VertexId, u64)>,
    {
        let mut g = DirectedGraph {
            n,
            edges: Vec::new(),
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
            index: BTreeMap::new(),
        };
        for (u, v, len) in edges {
            g.push_edge(u, v, len)?;
        }
        Ok(g)
    }

    fn push_edge(&mut self, u: VertexId, v: VertexId, len: u64) -> Result<EdgeId, GraphError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.index.contains_key(&(u, v)) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        let id = self.edges.len();
        self.edges.push(Edge { from: u, to: v, len });
        self.out_adj[u].push(id);
        self.in_adj[v].push(id);
        self.index.insert((u, v), id);
        Ok(id)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn find_edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.index.get(&(u, v)).copied()
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_adj[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_adj[v]
    }

    /// Edges incident to `v` in the given direction: outgoing for `Out`,
    /// incoming for `In`.
    pub fn incident(&self, v: VertexId, dir: Direction) -> &[EdgeId] {
        match dir {
            Direction::Out => &self.out_adj[v],
            Direction::In => &self.in_adj[v],
        }
    }

    /// The endpoint of `e` reached when walking it in direction `dir`.
    pub fn far_end(&self, e: EdgeId, dir: Direction) -> VertexId {
        match dir {
            Direction::Out => self.edges[e].to,
            Direction::In => self.edges[e].from,
        }
    }

    pub fn max_len(&self) -> u64 {
        self.edges.iter().map(|e| e.len).max().unwrap_or(0)
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<(), GraphError> {
        if v < self.n {
            Ok(())
        } else {
            Err(GraphError::InvalidVertex { vertex: v, n: self.n })
        }
    }

    /// Total length of an edge sequence.
    pub fn path_len(&self, path: &[EdgeId]) -> u64 {
        path.iter().map(|&e| self.edges[e].len).sum()
    }

    /// Parses the `n m` / `u v len` text format.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "missing `n m` header".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(parse_err(hl, "header must be `n m`"));
        }
        let n: usize = head[0].parse().map_err(|_| parse_err(hl, "bad vertex count"))?;
        let m: usize = head[1].parse().map_err(|_| parse_err(hl, "bad edge count"))?;
        let mut g = DirectedGraph::new(n, std::iter::empty())?;
        for _ in 0..m {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(hl, &format!("expected {m} edge lines")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(ln, "edge line must be `u v len`"));
            }
            let u: usize = parts[0].parse().map_err(|_| parse_err(ln, "bad source vertex"))?;
            let v: usize = parts[1].parse().map_err(|_| parse_err(ln, "bad target vertex"))?;
            let len: u64 = parts[2].parse().map_err(|_| parse_err(ln, "edge length must be a non-negative integer"))?;
            g.push_edge(u, v, len).map_err(|e| parse_err(ln, &e.to_string()))?;
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing content after edge list"));
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.from, e.to, e.len));
        }
        out
    }
}

fn parse_err(line: usize, msg: &str) -> GraphError {
    GraphError::Parse { line, msg: msg.to_string() }
}

/// A terminal pair with its distance target; `Distance::Infinite` means
/// connectivity only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub s: VertexId,
    pub t: VertexId,
    pub d: Distance,
}

impl Demand {
    pub fn new(s: VertexId, t: VertexId, d: Distance) -> Result<Self, GraphError> {
        if s == t {
            return Err(GraphError::DegenerateDemand(s));
        }
        Ok(Demand { s, t, d })
    }

    pub fn validate(&self, g: &DirectedGraph) -> Result<(), GraphError> {
        g.check_vertex(self.s)?;
        g.check_vertex(self.t)?;
        if self.s == self.t {
            return Err(GraphError::DegenerateDemand(self.s));
        }
        Ok(())
    }
}

/// Parses a demand stream: one `s t d` line per round, `d` may be `inf`.
pub fn parse_demands(text: &str) -> Result<Vec<Demand>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(i + 1, "demand line must be `s t d`"));
        }
        let s: usize = parts[0].parse().map_err(|_| parse_err(i + 1, "bad source vertex"))?;
        let t: usize = parts[1].parse().map_err(|_| parse_err(i + 1, "bad target vertex"))?;
        let d: Distance = parts[2].parse().map_err(|e: String| parse_err(i + 1, &e))?;
        out.push(Demand::new(s, t, d).map_err(|e| parse_err(i + 1, &e.to_string()))?);
    }
    Ok(out)
}

pub fn demands_to_text(demands: &[Demand]) -> String {
    demands.iter().map(|d| format!("{} {} {}\n", d.s, d.t, d.d)).collect()
}

/// A subset of a graph's edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    member: Vec<bool>,
    len: usize,
}

impl EdgeSet {
    pub fn empty(edge_count: usize) -> Self {
        EdgeSet { member: vec![false; edge_count], len: 0 }
    }

    pub fn full(edge_count: usize) -> Self {
        EdgeSet { member: vec![true; edge_count], len: edge_count }
    }

    pub fn from_ids<I: IntoIterator<Item = EdgeId>>(edge_count: usize, ids: I) -> Result<Self, GraphError> {
        let mut set = EdgeSet::empty(edge_count);
        for e in ids {
            if e >= edge_count {
                return Err(GraphError::InvalidEdge(e));
            }
            set.insert(e);
        }
        Ok(set)
    }

    /// Returns true when `e` was not already present.
    pub fn insert(&mut self, e: EdgeId) -> bool {
        if self.member[e] {
            false
        } else {
            self.member[e] = true;
            self.len += 1;
            true
        }
    }

    /// Inserts every id, returning how many were new.
    pub fn extend<I: IntoIterator<Item = EdgeId>>(&mut self, ids: I) -> usize {
        ids.into_iter().filter(|&e| self.insert(e)).count()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.member.get(e).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.member.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.iter().all(|e| other.contains(e))
    }
}

/// Heap entry for Dijkstra-style searches keyed on a `Distance` and broken
/// by vertex id, so pop order is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct HeapItem {
    pub dist: u64,
    pub vertex: VertexId,
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
