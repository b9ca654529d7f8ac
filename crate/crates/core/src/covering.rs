//! Online covering LP solver with guess-and-double phases.
//!
//! Solves `min <c, x> s.t. A x >= 1, x >= 0` with rows revealed one at a
//! time (or produced by a separation oracle). Within phase `r` every
//! variable follows
//!
//! ```text
//! x^r_j = alpha(r) / (2 n c_j) * exp( ln(2n) / c_j * sum_{k in phase r} a_kj y_k )
//! ```
//!
//! A violated row has its dual `y_i` raised until the row is covered twice
//! over. If the phase objective would pass `alpha(r)` first, the phase ends,
//! `alpha` doubles and the same row is retried in the new phase. The
//! maintained solution is the coordinate-wise maximum over all phases.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("cost vector is empty")]
    EmptyCost,
    #[error("cost c[{index}] = {value} is not a positive finite number")]
    NonPositiveCost { index: usize, value: f64 },
    #[error("coefficient for variable {index} is {value}; coefficients must be finite and non-negative")]
    BadCoefficient { index: usize, value: f64 },
    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("variable index {0} appears twice in one row")]
    DuplicateIndex(usize),
    #[error("row has no positive coefficient")]
    ZeroRow,
    #[error("separation oracle returned a row already covered ({coverage} >= 1)")]
    OracleContract { coverage: f64 },
    #[error("gave up after {0} oracle rows")]
    FixLimit(usize),
}

/// Strictly positive objective coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringCost(Vec<f64>);

impl CoveringCost {
    pub fn new(c: Vec<f64>) -> Result<Self, CoveringError> {
        if c.is_empty() {
            return Err(CoveringError::EmptyCost);
        }
        if let Some((index, &value)) = c.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(CoveringError::NonPositiveCost { index, value });
        }
        Ok(CoveringCost(c))
    }

    /// All-ones cost over `n` variables.
    pub fn ones(n: usize) -> Result<Self, CoveringError> {
        CoveringCost::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A sparse non-negative row with at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    entries: Vec<(usize, f64)>,
}

impl ConstraintRow {
    /// Zero coefficients are dropped; entries are kept sorted by index.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self, CoveringError> {
        let mut kept = Vec::with_capacity(entries.len());
        for (index, value) in entries {
            if !value.is_finite() || value < 0.0 {
                return Err(CoveringError::BadCoefficient { index, value });
            }
            if value > 0.0 {
                kept.push((index, value));
            }
        }
        kept.sort_by_key(|e| e.0);
        if let Some(w) = kept.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CoveringError::DuplicateIndex(w[0].0));
        }
        if kept.is_empty() {
            return Err(CoveringError::ZeroRow);
        }
        Ok(ConstraintRow { entries: kept })
    }

    pub fn from_dense(a: &[f64]) -> Result<Self, CoveringError> {
        ConstraintRow::new(a.iter().copied().enumerate().collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(j, a) in &self.entries {
            v[j] = a;
        }
        v
    }

    pub fn check_range(&self, n: usize) -> Result<(), CoveringError> {
        match self.entries.last() {
            Some(&(index, _)) if index >= n => Err(CoveringError::IndexOutOfRange { index, n }),
            _ => Ok(()),
        }
    }
}

/// Dual value assigned to one row arrival within a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRecord {
    /// Zero-based arrival index of the row.
    pub row: usize,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    alpha: f64,
    first_row: usize,
    x: Vec<f64>,
    load: Vec<f64>,
    duals: Vec<DualRecord>,
}

impl Phase {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Arrival index of the row that opened this phase.
    pub fn first_row(&self) -> usize {
        self.first_row
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `sum_k a_kj y_k` over the rows handled in this phase.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn duals(&self) -> &[DualRecord] {
        &self.duals
    }

    pub fn dual_total(&self) -> f64 {
        self.duals.iter().map(|d| d.y).sum()
    }

    pub fn objective(&self, c: &CoveringCost) -> f64 {
        c.as_slice().iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixReport {
    pub violated: bool,
    pub phases_started: usize,
    /// Total dual raised for this row, summed over the phases it touched.
    pub y_assigned: f64,
    /// Variables whose per-phase value at least doubled while fixing the row.
    pub variables_doubled: Vec<usize>,
    /// The row ended covered twice over by growth inside its final phase.
    /// False when a restarted phase already covered it at its starting
    /// values.
    pub grown_to_two: bool,
}

/// Relative stopping width for the bisection on `y`.
const SEARCH_TOL: f64 = 1e-9;
const MAX_ORACLE_ROWS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct CoveringState {
    cost: CoveringCost,
    ln_2n: f64,
    phases: Vec<Phase>,
    solution: Vec<f64>,
    rows_seen: usize,
    fixes: usize,
}

impl CoveringState {
    pub fn new(cost: CoveringCost) -> Self {
        let n = cost.len();
        CoveringState {
            ln_2n: (2.0 * n as f64).ln(),
            cost,
            phases: Vec::new(),
            solution: vec![0.0; n],
            rows_seen: 0,
            fixes: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn cost(&self) -> &CoveringCost {
        &self.cost
    }

    /// Coordinate-wise maximum over all phases.
    pub fn solution(&self) -> &[f64] {
        &self.solution
    }

    pub fn objective(&self) -> f64 {
        self.cost.as_slice().iter().zip(&self.solution).map(|(c, x)| c * x).sum()
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// `alpha(1)`, once the first row has arrived.
    pub fn initial_alpha(&self) -> Option<f64> {
        self.phases.first().map(|p| p.alpha)
    }

    pub fn current_alpha(&self) -> Option<f64> {
        self.phases.last().map(|p| p.alpha)
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Number of rows that arrived violated.
    pub fn fixes(&self) -> usize {
        self.fixes
    }

    fn start_phase(&mut self, alpha: f64, first_row: usize) {
        let n = self.num_vars() as f64;
        let x: Vec<f64> = self.cost.as_slice().iter().map(|c| alpha / (2.0 * n * c)).collect();
        for (s, v) in self.solution.iter_mut().zip(&x) {
            *s = s.max(*v);
        }
        self.phases.push(Phase { alpha, first_row, load: vec![0.0; x.len()], x, duals: Vec::new() });
    }

    /// Per-phase value of `x_j` at load `load`.
    fn value(&self, alpha: f64, j: usize, load: f64) -> f64 {
        let c = self.cost.as_slice()[j];
        let n = self.num_vars() as f64;
        alpha / (2.0 * n * c) * (self.ln_2n / c * load).exp()
    }

    pub fn process(&mut self, row: &ConstraintRow) -> Result<FixReport, CoveringError> {
        row.check_range(self.num_vars())?;
        let seq = self.rows_seen;
        self.rows_seen += 1;
        if self.phases.is_empty() {
            let c = self.cost.as_slice();
            let alpha = row.entries().iter().map(|&(j, a)| c[j] / a).fold(f64::INFINITY, f64::min);
            self.start_phase(alpha, seq);
        }

        let mut report = FixReport::default();
        loop {
            let phase = self.phases.last().expect("phase started above");
            if row.dot(&phase.x) >= 1.0 {
                break;
            }
            report.violated = true;
            let alpha = phase.alpha;
            let c = self.cost.as_slice();

            let coverage_at = |y: f64| -> f64 {
                row.entries().iter().map(|&(j, a)| a * self.value(alpha, j, phase.load[j] + a * y)).sum()
            };
            // only support variables move, the rest of the objective is fixed
            let fixed_cost: f64 =
                phase.objective(&self.cost) - row.entries().iter().map(|&(j, _)| c[j] * phase.x[j]).sum::<f64>();
            let objective_at = |y: f64| -> f64 {
                fixed_cost
                    + row
                        .entries()
                        .iter()
                        .map(|&(j, a)| c[j] * self.value(alpha, j, phase.load[j] + a * y))
                        .sum::<f64>()
            };

            let (_, y_cover) = bisect(coverage_at, 2.0);
            let (y_budget, _) = bisect(objective_at, alpha);
            let (y, finished) = if y_cover <= y_budget { (y_cover, true) } else { (y_budget, false) };

            let phase = self.phases.last_mut().expect("phase exists");
            for &(j, a) in row.entries() {
                let before = phase.x[j];
                phase.load[j] += a * y;
                let after = {
                    let cj = self.cost.as_slice()[j];
                    let n = self.cost.len() as f64;
                    alpha / (2.0 * n * cj) * (self.ln_2n / cj * phase.load[j]).exp()
                };
                phase.x[j] = after;
                self.solution[j] = self.solution[j].max(after);
                // bisection leaves the budget crossing up to SEARCH_TOL short
                if after >= 2.0 * before * (1.0 - SEARCH_TOL) {
                    report.variables_doubled.push(j);
                }
            }
            phase.duals.push(DualRecord { row: seq, y });
            report.y_assigned += y;

            if finished {
                report.grown_to_two = true;
                break;
            }
            self.start_phase(2.0 * alpha, seq);
            report.phases_started += 1;
        }
        report.variables_doubled.sort_unstable();
        report.variables_doubled.dedup();
        if report.violated {
            self.fixes += 1;
        }
        Ok(report)
    }

    /// Feeds oracle rows until the oracle reports none; returns the number
    /// of rows handled. The oracle sees the current solution and must only
    /// return rows it violates.
    pub fn process_with_oracle<F>(&mut self, mut oracle: F) -> Result<usize, CoveringError>
    where
        F: FnMut(&[f64]) -> Option<ConstraintRow>,
    {
        let mut handled = 0;
        while let Some(row) = oracle(&self.solution) {
            row.check_range(self.num_vars())?;
            let coverage = row.dot(&self.solution);
            if coverage >= 1.0 {
                return Err(CoveringError::OracleContract { coverage });
            }
            self.process(&row)?;
            handled += 1;
            if handled >= MAX_ORACLE_ROWS {
                return Err(CoveringError::FixLimit(handled));
            }
        }
        Ok(handled)
    }
}

/// For increasing `f` returns `(lo, hi)` with `f(lo) < target <= f(hi)`
/// (or `(0, 0)` when `f(0)` already meets the target) and
/// `hi - lo <= SEARCH_TOL * hi`.
fn bisect<F: Fn(f64) -> f64>(f: F, target: f64) -> (f64, f64) {
    if f(0.0) >= target {
        return (0.0, 0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        assert!(hi.is_finite(), "increment search diverged");
    }
    for _ in 0..200 {
        if hi - lo <= SEARCH_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, f64)]) -> ConstraintRow {
        ConstraintRow::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn fresh_state_is_zero() {
        let st = CoveringState::new(CoveringCost::new(vec![1.0, 1.0]).unwrap());
        assert!(st.phases().is_empty());
        assert_eq!(st.solution(), &[0.0, 0.0]);
        assert_eq!(st.objective(), 0.0);
    }

    #[test]
    fn rejects_bad_costs_and_rows() {
        assert!(matches!(CoveringCost::new(vec![1.0, 0.0]), Err(CoveringError::NonPositiveCost { index: 1, .. })));
        assert_eq!(CoveringCost::new(vec![]), Err(CoveringError::EmptyCost));
        assert_eq!(ConstraintRow::new(vec![(0, 0.0)]), Err(CoveringError::ZeroRow));
        assert!(ConstraintRow::new(vec![(0, -1.0)]).is_err());
        assert_eq!(ConstraintRow::new(vec![(1, 1.0), (1, 2.0)]), Err(CoveringError::DuplicateIndex(1)));
        let mut st = CoveringState::new(CoveringCost::ones(2).unwrap());
        assert!(matches!(st.process(&row(&[(2, 1.0)])), Err(CoveringError::IndexOutOfRange { index: 2, n: 2 })));
    }

    #[test]
    fn first_alpha_is_min_cost_ratio() {
        let mut st = CoveringState::new(CoveringCost::new(vec![2.0, 3.0]).unwrap());
        st.process(&row(&[(0, 1.0), (1, 0.5)])).unwrap();
        assert_eq!(st.initial_alpha(), Some(2.0));
    }

    #[test]
    fn single_variable_hand_simulation() {
        // alpha(1) = 1, phase 1 starts at x = 1/2 and can only grow to the
        // budget x = 1 before covering twice; phase 2 starts at
        // x = 2 / (2 * 1 * 1) = 1 which already covers the row.
        let mut st = CoveringState::new(CoveringCost::new(vec![1.0]).unwrap());
        let rep = st.process(&row(&[(0, 1.0)])).unwrap();
        assert!(rep.violated);
        assert_eq!(rep.phases_started, 1);
        assert_eq!(st.phases().len(), 2);
        assert_eq!(st.phases()[1].alpha(), 2.0);
        assert!((st.phases()[0].x()[0] - 1.0).abs() < 1e-8);
        assert_eq!(st.phases()[1].x()[0], 1.0);
        assert!((st.solution()[0] - 1.0).abs() < 1e-8);
        assert!((st.objective() - 1.0).abs() < 1e-8);
        assert!(st.solution()[0] <= 1.0 + 1e-12);
        assert_eq!(rep.variables_doubled, vec![0]);
        // y solves 1/2 * exp(ln 2 * y) = 1
        assert!((rep.y_assigned - 1.0).abs() < 1e-8);
    }

    #[test]
    fn satisfied_row_is_a_no_op() {
        let mut st = CoveringState::new(CoveringCost::new(vec![1.0]).unwrap());
        st.process(&row(&[(0, 1.0)])).unwrap();
        let before = st.solution().to_vec();
        let rep = st.process(&row(&[(0, 1.0)])).unwrap();
        assert_eq!(rep, FixReport::default());
        assert_eq!(st.solution(), before.as_slice());
        assert_eq!(st.fixes(), 1);
        assert_eq!(st.rows_seen(), 2);
    }

    #[test]
    fn fix_within_phase_covers_twice() {
        // c = (1, 1), first row x0 + x1 >= 1: alpha = 1, start (1/4, 1/4)
        let mut st = CoveringState::new(CoveringCost::ones(2).unwrap());
        st.process(&row(&[(0, 1.0), (1, 1.0)])).unwrap();
        // a later row with small support coefficients
        let rep = st.process(&row(&[(0, 0.1), (1, 4.0)])).unwrap();
        let last = st.phases().last().unwrap();
        if rep.phases_started == 0 && rep.violated {
            assert!(row(&[(0, 0.1), (1, 4.0)]).dot(last.x()) >= 2.0);
            assert!(!rep.variables_doubled.is_empty());
        }
        assert!(row(&[(0, 0.1), (1, 4.0)]).dot(st.solution()) >= 1.0);
        for p in st.phases() {
            assert!(p.objective(st.cost()) <= p.alpha() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn oracle_none_means_zero_fixes() {
        let mut st = CoveringState::new(CoveringCost::ones(3).unwrap());
        assert_eq!(st.process_with_oracle(|_| None).unwrap(), 0);
    }

    #[test]
    fn oracle_replaying_a_row_terminates() {
        let target = row(&[(0, 0.5), (2, 0.25)]);
        let mut st = CoveringState::new(CoveringCost::new(vec![1.0, 2.0, 3.0]).unwrap());
        let t = target.clone();
        let fixes = st.process_with_oracle(move |x| if t.dot(x) < 1.0 { Some(t.clone()) } else { None }).unwrap();
        assert_eq!(fixes, 1);
        assert!(target.dot(st.solution()) >= 1.0);
    }

    #[test]
    fn oracle_contract_breach_is_reported() {
        let mut st = CoveringState::new(CoveringCost::ones(1).unwrap());
        st.process(&row(&[(0, 1.0)])).unwrap();
        let err = st.process_with_oracle(|_| Some(row(&[(0, 1.0)]))).unwrap_err();
        assert!(matches!(err, CoveringError::OracleContract { .. }));
    }
}
