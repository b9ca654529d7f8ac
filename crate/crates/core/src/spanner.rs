//! Online pairwise spanner and Steiner forest.
//!
//! Each arriving demand first raises the fractional capacities `x` until
//! they route the demand (see [`crate::separation`]). Rounds before the
//! threshold `T` buy one cheap path; round `T` samples roots whose shortest
//! path in- and out-arborescences settle thick demands, then rounds every
//! edge with `p_e = min(1, x_e t ln n)`; later rounds top up each edge with
//! the conditional probability `(p^i_e - p^{i-1}_e) / (1 - p^{i-1}_e)`, so
//! an edge touched only by rounding is in `E'` with probability `p^i_e`.
//! A demand left unsettled by the random steps gets a cheapest feasible path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{CoveringCost, CoveringState};
use crate::graph::{Demand, DirectedGraph, Direction, Distance, EdgeSet, GraphError, VertexId};
use crate::paths::{cheapest_feasible_path, is_settled, shortest_path_arborescence};
use crate::separation::{solve_round, SeparationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpannerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("demand {s} -> {t} has no path of length at most {d}")]
    InfeasibleDemand { s: VertexId, t: VertexId, d: Distance },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
}

/// Parameter profile selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    General,
    BoundedD,
    Quasimetric,
    AllServer,
    SteinerForest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpannerMode {
    General,
    /// Every demand asks for distance at most `d`.
    BoundedD(u64),
    Quasimetric,
    AllServer,
    /// Reachability only; the parameter is `epsilon` in `(0, 1/3)`.
    SteinerForest(f64),
}

impl SpannerMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            SpannerMode::General => ModeKind::General,
            SpannerMode::BoundedD(_) => ModeKind::BoundedD,
            SpannerMode::Quasimetric => ModeKind::Quasimetric,
            SpannerMode::AllServer => ModeKind::AllServer,
            SpannerMode::SteinerForest(_) => ModeKind::SteinerForest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpannerParams {
    pub mode: SpannerMode,
    /// Round threshold `T`.
    pub threshold: usize,
    /// Thickness `t`.
    pub thickness: f64,
    pub seed: u64,
}

impl SpannerParams {
    pub fn validate(&self) -> Result<(), SpannerError> {
        if self.threshold < 1 {
            return Err(SpannerError::InvalidParameter("threshold T must be at least 1".into()));
        }
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return Err(SpannerError::InvalidParameter(format!("thickness t = {} must be positive", self.thickness)));
        }
        Ok(())
    }
}

/// Largest `T >= 0` with `T^k * den <= num`.
fn int_root_floor(num: u128, den: u128, k: u32) -> u64 {
    let (mut lo, mut hi) = (0u64, 1u64);
    while (hi as u128).pow(k).saturating_mul(den) <= num {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if (mid as u128).pow(k).saturating_mul(den) <= num {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `floor(v)`, except that values within relative 1e-12 below an integer
/// count as that integer.
fn floor_snapped(v: f64) -> u64 {
    let r = v.round();
    if (r - v).abs() <= 1e-12 * v.abs().max(1.0) {
        r as u64
    } else {
        v.floor() as u64
    }
}

/// Threshold and thickness for each profile:
///
/// | mode | `T` | `t` |
/// |---|---|---|
/// | general | `floor(n^(4/5))` | `floor(n^(4/5))` |
/// | bounded-d | `floor(d^(-4/3) n^(4/3))` | `d^(1/3) n^(2/3)` |
/// | quasimetric, all-server | `floor(n^(4/3))` | `n^(2/3)` |
/// | steiner-forest | `floor(n^(4/3 - 4 eps))` | `n^(2/3 + eps)` |
///
/// `T` is clamped to at least 1.
pub fn params_for(
    kind: ModeKind,
    n: usize,
    d: Option<u64>,
    epsilon: Option<f64>,
    seed: u64,
) -> Result<SpannerParams, SpannerError> {
    if n < 2 {
        return Err(SpannerError::InvalidParameter(format!("need at least 2 vertices, got {n}")));
    }
    let n4 = (n as u128).pow(4);
    let nf = n as f64;
    let (mode, threshold, thickness) = match kind {
        ModeKind::General => {
            let t = int_root_floor(n4, 1, 5);
            (SpannerMode::General, t, t as f64)
        }
        ModeKind::BoundedD => {
            let d =
                d.ok_or_else(|| SpannerError::InvalidParameter("bounded-d mode needs a distance bound d".into()))?;
            if d == 0 {
                return Err(SpannerError::InvalidParameter("distance bound d must be positive".into()));
            }
            let big_t = int_root_floor(n4, (d as u128).pow(4), 3);
            (SpannerMode::BoundedD(d), big_t, (d as f64 * nf * nf).cbrt())
        }
        ModeKind::Quasimetric | ModeKind::AllServer => {
            let mode = if kind == ModeKind::Quasimetric { SpannerMode::Quasimetric } else { SpannerMode::AllServer };
            (mode, int_root_floor(n4, 1, 3), (nf * nf).cbrt())
        }
        ModeKind::SteinerForest => {
            let eps =
                epsilon.ok_or_else(|| SpannerError::InvalidParameter("steiner-forest mode needs epsilon".into()))?;
            if !(eps > 0.0 && eps < 1.0 / 3.0) {
                return Err(SpannerError::InvalidParameter(format!("epsilon = {eps} must lie in (0, 1/3)")));
            }
            let big_t = floor_snapped(nf.powf(4.0 / 3.0 - 4.0 * eps));
            (SpannerMode::SteinerForest(eps), big_t, nf.powf(2.0 / 3.0 + eps))
        }
    };
    Ok(SpannerParams { mode, threshold: threshold.max(1) as usize, thickness, seed })
}

/// Which step of the round handled the demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Round before the threshold: one cheap path (or the direct edge).
    Greedy,
    /// Threshold round: arborescences plus independent rounding.
    ArborescenceRound,
    /// Later rounds: conditional rounding.
    ConditionalRound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub branch: Branch,
    /// Edges new to `E'` this round, repair included.
    pub edges_added: usize,
    /// `|E'|` after the round.
    pub spanner_edges: usize,
    /// Online LP objective `sum_e x_e` after the round.
    pub lp_objective: f64,
    pub settled: bool,
    pub repaired: bool,
    /// Covering rows generated for this demand.
    pub fixes: usize,
    /// Distinct arborescence roots, non-empty only in the threshold round.
    pub roots: Vec<VertexId>,
}

#[derive(Debug, Clone)]
pub struct SpannerRunState<'g> {
    g: &'g DirectedGraph,
    params: SpannerParams,
    ln_n: f64,
    round: usize,
    spanner: EdgeSet,
    // edges placed by greedy, arborescence or repair steps
    forced: EdgeSet,
    prev_p: Vec<f64>,
    covering: CoveringState,
    rng: ChaCha8Rng,
    demands: Vec<Demand>,
    log: Vec<RoundOutcome>,
}

impl<'g> SpannerRunState<'g> {
    pub fn new(g: &'g DirectedGraph, params: SpannerParams) -> Result<Self, SpannerError> {
        params.validate()?;
        if g.edge_count() == 0 {
            return Err(SpannerError::InvalidParameter("graph has no edges".into()));
        }
        let m = g.edge_count();
        Ok(SpannerRunState {
            g,
            params,
            ln_n: (g.vertex_count() as f64).ln(),
            round: 0,
            spanner: EdgeSet::empty(m),
            forced: EdgeSet::empty(m),
            prev_p: vec![0.0; m],
            covering: CoveringState::new(CoveringCost::ones(m).expect("m >= 1")),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            demands: Vec::new(),
            log: Vec::new(),
        })
    }

    pub fn params(&self) -> &SpannerParams {
        &self.params
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// The chosen edge set `E'`.
    pub fn spanner(&self) -> &EdgeSet {
        &self.spanner
    }

    /// Edges added by a deterministic step at some point (greedy path,
    /// arborescence or repair).
    pub fn forced_edges(&self) -> &EdgeSet {
        &self.forced
    }

    /// Marginals `p^i_e` of the latest round.
    pub fn marginals(&self) -> &[f64] {
        &self.prev_p
    }

    pub fn covering(&self) -> &CoveringState {
        &self.covering
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn log(&self) -> &[RoundOutcome] {
        &self.log
    }

    /// The demand as the mode interprets it: Steiner forest ignores the
    /// distance target.
    pub fn effective(&self, dem: &Demand) -> Demand {
        match self.params.mode {
            SpannerMode::SteinerForest(_) => Demand { d: Distance::Infinite, ..*dem },
            _ => *dem,
        }
    }

    /// Whether `E'` already satisfies the demand.
    pub fn settle_check(&self, dem: &Demand) -> Result<bool, SpannerError> {
        Ok(is_settled(self.g, &self.spanner, &self.effective(dem))?)
    }

    pub fn all_settled(&self) -> Result<bool, SpannerError> {
        for d in &self.demands {
            if !self.settle_check(d)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn marginal(&self, x: f64) -> f64 {
        (x * self.params.thickness * self.ln_n).min(1.0)
    }

    fn force<I: IntoIterator<Item = usize>>(&mut self, edges: I) -> usize {
        let mut added = 0;
        for e in edges {
            self.forced.insert(e);
            if self.spanner.insert(e) {
                added += 1;
            }
        }
        added
    }

    fn greedy_path(&self, dem: &Demand) -> Result<Vec<usize>, SpannerError> {
        if matches!(self.params.mode, SpannerMode::AllServer | SpannerMode::Quasimetric) {
            if let Some(e) = self.g.find_edge(dem.s, dem.t) {
                if Distance::Finite(self.g.edge(e).len).within(dem.d) {
                    return Ok(vec![e]);
                }
            }
        }
        cheapest_feasible_path(self.g, dem.s, dem.t, dem.d)?.ok_or(SpannerError::InfeasibleDemand {
            s: dem.s,
            t: dem.t,
            d: dem.d,
        })
    }

    pub fn process_demand(&mut self, dem: &Demand) -> Result<RoundOutcome, SpannerError> {
        let dem = self.effective(dem);
        dem.validate(self.g)?;
        if cheapest_feasible_path(self.g, dem.s, dem.t, dem.d)?.is_none() {
            return Err(SpannerError::InfeasibleDemand { s: dem.s, t: dem.t, d: dem.d });
        }
        let round = self.round + 1;
        let solved = solve_round(&mut self.covering, self.g, &dem, round)?;
        let p: Vec<f64> = solved.x.iter().map(|&x| self.marginal(x)).collect();

        let threshold = self.params.threshold;
        let mut added = 0;
        let mut roots = Vec::new();
        let branch = if round < threshold {
            let path = self.greedy_path(&dem)?;
            added += self.force(path);
            Branch::Greedy
        } else if round == threshold {
            let n = self.g.vertex_count();
            let draws = (3.0 * n as f64 * self.ln_n / self.params.thickness).ceil() as usize;
            let mut picked = vec![false; n];
            for _ in 0..draws {
                picked[self.rng.random_range(0..n)] = true;
            }
            roots = (0..n).filter(|&v| picked[v]).collect();
            for &w in &roots {
                for dir in [Direction::In, Direction::Out] {
                    let tree = shortest_path_arborescence(self.g, w, dir)?;
                    added += self.force(tree.iter());
                }
            }
            for (e, &pe) in p.iter().enumerate() {
                if !self.spanner.contains(e) {
                    let u: f64 = self.rng.random();
                    if u < pe {
                        self.spanner.insert(e);
                        added += 1;
                    }
                }
            }
            Branch::ArborescenceRound
        } else {
            for (e, &pe) in p.iter().enumerate() {
                if !self.spanner.contains(e) {
                    let prev = self.prev_p[e];
                    let q = if prev >= 1.0 { 0.0 } else { (pe - prev) / (1.0 - prev) };
                    let u: f64 = self.rng.random();
                    if u < q {
                        self.spanner.insert(e);
                        added += 1;
                    }
                }
            }
            Branch::ConditionalRound
        };

        let repaired = !is_settled(self.g, &self.spanner, &dem)?;
        if repaired {
            let path = cheapest_feasible_path(self.g, dem.s, dem.t, dem.d)?.expect("feasibility checked above");
            added += self.force(path);
        }
        let settled = is_settled(self.g, &self.spanner, &dem)?;
        debug_assert!(settled);

        self.prev_p = p;
        self.round = round;
        self.demands.push(dem);
        let outcome = RoundOutcome {
            round,
            branch,
            edges_added: added,
            spanner_edges: self.spanner.len(),
            lp_objective: solved.objective,
            settled,
            repaired,
            fixes: solved.fixes,
            roots,
        };
        self.log.push(outcome.clone());
        Ok(outcome)
    }
}
