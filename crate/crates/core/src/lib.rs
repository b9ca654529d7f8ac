//! Online primal-dual covering and packing, and online directed pairwise
//! spanners and Steiner forests built on them.
//!
//! Module map:
//!
//! - [`graph`], [`paths`]: digraphs with integer lengths and the exact
//!   path and arborescence primitives.
//! - [`covering`], [`packing`]: the online LP engines.
//! - [`separation`]: the spanner LP as an online covering LP.
//! - [`spanner`]: the online rounding algorithm and its parameter profiles.
//! - [`oracles`], [`simplex`]: exact ground truth at desk scale.
//! - [`harness`]: generators, JSONL logs, audits and Monte Carlo.

pub mod covering;
pub mod graph;
pub mod harness;
pub mod oracles;
pub mod packing;
pub mod paths;
pub mod separation;
pub mod simplex;
pub mod spanner;

pub use covering::{ConstraintRow, CoveringCost, CoveringError, CoveringState, FixReport};
pub use graph::{Demand, DirectedGraph, Direction, Distance, EdgeId, EdgeSet, GraphError, VertexId};
pub use packing::{PackingError, PackingReport, PackingState};
pub use separation::{separate, solve_round, SeparatingConstraint, Separation, SeparationError};
pub use spanner::{
    params_for, Branch, ModeKind, RoundOutcome, SpannerError, SpannerMode, SpannerParams, SpannerRunState,
};
