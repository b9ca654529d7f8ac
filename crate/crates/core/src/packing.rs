//! Online packing LP solver.
//!
//! Columns of `A^T y <= c` arrive one at a time; each arriving variable
//! `y_i` is either left at zero or irrevocably set positive. A shadow
//! covering vector `x` drives the decision: a column already covered by `x`
//! gets `y_i = 0`, otherwise `y_i` grows until the column is covered twice,
//! with
//!
//! ```text
//! x_j = max{ x_j, (exp(B / (3 c_j) * L_j) - 1) / (n * amax_j) },   L_j = sum_k a_kj y_k
//! ```
//!
//! The packing constraints hold up to a factor
//! `3 ln(2 n amax_j / amin_j + 1) / B` per row.

use thiserror::Error;

use crate::covering::ConstraintRow;

/// A packing column shares the sparse non-negative row representation.
pub type PackingColumn = ConstraintRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PackingError {
    #[error("upper bound vector is empty")]
    EmptyBounds,
    #[error("upper bound c[{index}] = {value} is not a positive finite number")]
    NonPositiveBound { index: usize, value: f64 },
    #[error("parameter B = {0} must be a positive finite number")]
    BadB(f64),
    #[error("row index {index} out of range for {n} packing constraints")]
    IndexOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingReport {
    /// `sum_i y_i`
    pub objective: f64,
    /// `<c, x>` of the shadow covering solution.
    pub covering_objective: f64,
    /// `L_j / c_j` for every packing row.
    pub violation: Vec<f64>,
    /// `3 max_j ln(2 n amax_j / amin_j + 1)` over rows seen with a positive
    /// entry; zero before any column arrives.
    pub b_prime: f64,
    /// `max_j amax_j / c_j`
    pub alpha: f64,
}

const SEARCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PackingState {
    b: f64,
    c: Vec<f64>,
    a_max: Vec<f64>,
    // +inf until a positive entry is seen
    a_min: Vec<f64>,
    load: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PackingState {
    pub fn new(c: Vec<f64>, b: f64) -> Result<Self, PackingError> {
        if c.is_empty() {
            return Err(PackingError::EmptyBounds);
        }
        if let Some((index, &value)) = c.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(PackingError::NonPositiveBound { index, value });
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(PackingError::BadB(b));
        }
        let n = c.len();
        Ok(PackingState {
            b,
            c,
            a_max: vec![0.0; n],
            a_min: vec![f64::INFINITY; n],
            load: vec![0.0; n],
            x: vec![0.0; n],
            y: Vec::new(),
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn bounds(&self) -> &[f64] {
        &self.c
    }

    /// Final values of all variables so far, in arrival order.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `L_j = sum_i a_ij y_i`.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn a_max(&self) -> &[f64] {
        &self.a_max
    }

    /// Smallest positive entry seen per row, `None` if the row is untouched.
    pub fn a_min(&self, j: usize) -> Option<f64> {
        let v = self.a_min[j];
        v.is_finite().then_some(v)
    }

    fn rows(&self) -> usize {
        self.c.len()
    }

    fn target(&self, j: usize, load: f64) -> f64 {
        let n = self.rows() as f64;
        ((self.b / (3.0 * self.c[j]) * load).exp() - 1.0) / (n * self.a_max[j])
    }

    /// Handles one arriving column and returns the value fixed for its
    /// variable.
    pub fn process_column(&mut self, col: &PackingColumn) -> Result<f64, PackingError> {
        if let Some(&(index, _)) = col.entries().last() {
            if index >= self.rows() {
                return Err(PackingError::IndexOutOfRange { index, n: self.rows() });
            }
        }
        for &(j, a) in col.entries() {
            self.a_max[j] = self.a_max[j].max(a);
            self.a_min[j] = self.a_min[j].min(a);
        }
        if col.dot(&self.x) >= 1.0 {
            self.y.push(0.0);
            return Ok(0.0);
        }

        let coverage_at = |y: f64| -> f64 {
            col.entries().iter().map(|&(j, a)| a * self.x[j].max(self.target(j, self.load[j] + a * y))).sum()
        };
        let y = search_up(coverage_at, 2.0);

        for &(j, a) in col.entries() {
            self.load[j] += a * y;
            let t = self.target(j, self.load[j]);
            self.x[j] = self.x[j].max(t);
        }
        self.y.push(y);
        Ok(y)
    }

    pub fn report(&self) -> PackingReport {
        let n = self.rows() as f64;
        let b_prime = (0..self.rows())
            .filter(|&j| self.a_max[j] > 0.0)
            .map(|j| 3.0 * (2.0 * n * self.a_max[j] / self.a_min[j] + 1.0).ln())
            .fold(0.0, f64::max);
        PackingReport {
            objective: self.y.iter().sum(),
            covering_objective: self.c.iter().zip(&self.x).map(|(c, x)| c * x).sum(),
            violation: self.load.iter().zip(&self.c).map(|(l, c)| l / c).collect(),
            b_prime,
            alpha: self.a_max.iter().zip(&self.c).map(|(a, c)| a / c).fold(0.0, f64::max),
        }
    }

    /// Per-row bound `c_j * 3 ln(2 n amax_j / amin_j + 1) / B` on the load;
    /// zero for rows never touched.
    pub fn load_bound(&self, j: usize) -> f64 {
        if self.a_max[j] == 0.0 {
            return 0.0;
        }
        let n = self.rows() as f64;
        self.c[j] * 3.0 * (2.0 * n * self.a_max[j] / self.a_min[j] + 1.0).ln() / self.b
    }

    /// `y * B / B'`, which satisfies every packing row. Returns `y`
    /// unchanged while no column has arrived.
    pub fn scaled_y(&self) -> Vec<f64> {
        let bp = self.report().b_prime;
        if bp == 0.0 {
            return self.y.clone();
        }
        self.y.iter().map(|y| y * self.b / bp).collect()
    }
}

/// Smallest `y` (within tolerance, from above) with `f(y) >= target` for an
/// increasing `f` that starts below the target.
fn search_up<F: Fn(f64) -> f64>(f: F, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        assert!(hi.is_finite(), "packing increment search diverged");
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
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(entries: &[(usize, f64)]) -> PackingColumn {
        ConstraintRow::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn constructor_validation() {
        assert!(PackingState::new(vec![1.0], 1.0).is_ok());
        assert_eq!(PackingState::new(vec![1.0], 0.0).unwrap_err(), PackingError::BadB(0.0));
        assert!(PackingState::new(vec![1.0], -2.0).is_err());
        assert!(PackingState::new(vec![0.0], 1.0).is_err());
        assert_eq!(PackingState::new(vec![], 1.0).unwrap_err(), PackingError::EmptyBounds);
    }

    #[test]
    fn empty_state_report() {
        let st = PackingState::new(vec![1.0, 2.0], 1.0).unwrap();
        let r = st.report();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.covering_objective, 0.0);
        assert_eq!(r.b_prime, 0.0);
    }

    #[test]
    fn closed_form_single_row() {
        // n = 1, c = 1, B = 3: x = exp(L) - 1 must reach 2, so y = ln 3
        let mut st = PackingState::new(vec![1.0], 3.0).unwrap();
        let y = st.process_column(&col(&[(0, 1.0)])).unwrap();
        assert!((y - 3f64.ln()).abs() < 1e-8, "y = {y}");
        assert!((st.x()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn covered_column_gets_zero() {
        let mut st = PackingState::new(vec![1.0], 3.0).unwrap();
        st.process_column(&col(&[(0, 1.0)])).unwrap();
        let y = st.process_column(&col(&[(0, 0.75)])).unwrap();
        assert_eq!(y, 0.0);
        assert_eq!(st.y().len(), 2);
    }

    #[test]
    fn single_satisfied_column_report() {
        let mut st = PackingState::new(vec![1.0, 1.0], 1.0).unwrap();
        st.process_column(&col(&[(0, 1.0)])).unwrap();
        let y0 = st.report().objective;
        assert_eq!(st.process_column(&col(&[(0, 1.0)])).unwrap(), 0.0);
        assert_eq!(st.report().objective, y0);
    }

    #[test]
    fn out_of_range_column() {
        let mut st = PackingState::new(vec![1.0], 1.0).unwrap();
        assert!(matches!(st.process_column(&col(&[(1, 1.0)])), Err(PackingError::IndexOutOfRange { index: 1, n: 1 })));
    }
}
