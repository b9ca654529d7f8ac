//! Small dense two-phase tableau simplex with Bland's rule.
//!
//! Generic over the scalar so the same solver runs in `f64` (with a pivot
//! tolerance) or exactly over `BigRational` for verification on tiny
//! problems. All variables are non-negative; upper bounds are expressed as
//! ordinary rows.

use std::fmt::Debug;

use num::{BigRational, FromPrimitive, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Scalar field usable by the simplex.
pub trait LpNum: Clone + PartialOrd + Debug + Signed + FromPrimitive + ToPrimitive {
    /// Magnitudes at or below this are treated as zero.
    fn tolerance() -> Self;

    fn is_pos(&self) -> bool {
        *self > Self::tolerance()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::tolerance()
    }
}

impl LpNum for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}

impl LpNum for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow<T> {
    pub coeffs: Vec<T>,
    pub cmp: Cmp,
    pub rhs: T,
}

/// `optimize objective·x subject to rows, x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLp<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub rows: Vec<LpRow<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Row duals as sensitivities of the optimum to each right-hand side,
    /// in the problem's own sense.
    pub duals: Vec<T>,
    pub pivots: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("row {row} has {got} coefficients, expected {expected}")]
    Shape { row: usize, got: usize, expected: usize },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
}

const PIVOT_LIMIT: usize = 200_000;

impl<T: LpNum> DenseLp<T> {
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        DenseLp { sense, objective, rows: Vec::new() }
    }

    pub fn add_row(&mut self, coeffs: Vec<T>, cmp: Cmp, rhs: T) {
        self.rows.push(LpRow { coeffs, cmp, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        let n = self.num_vars();
        for (i, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != n {
                return Err(LpError::Shape { row: i, got: r.coeffs.len(), expected: n });
            }
        }
        Tableau::build(self).run(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Original,
    Slack,
    Artificial,
}

struct Tableau<T> {
    // m rows of width `cols`, plus rhs
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    // column holding +e_i in the normalized row i (slack or artificial)
    unit_col: Vec<usize>,
    // +1 / -1 applied to row i during normalization
    row_sign: Vec<T>,
    pivots: usize,
}

impl<T: LpNum> Tableau<T> {
    fn build(lp: &DenseLp<T>) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        // normalize to rhs >= 0
        let mut rows: Vec<(Vec<T>, Cmp, T, T)> = Vec::with_capacity(m);
        for r in &lp.rows {
            if r.rhs.is_negative() {
                let cmp = match r.cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
                let coeffs = r.coeffs.iter().map(|c| -c.clone()).collect();
                rows.push((coeffs, cmp, -r.rhs.clone(), -T::one()));
            } else {
                rows.push((r.coeffs.clone(), r.cmp, r.rhs.clone(), T::one()));
            }
        }
        let slacks = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let artificials = rows.iter().filter(|r| r.1 != Cmp::Le).count();
        let cols = n + slacks + artificials;
        let mut kinds = vec![ColKind::Original; n];
        kinds.extend(std::iter::repeat_n(ColKind::Slack, slacks));
        kinds.extend(std::iter::repeat_n(ColKind::Artificial, artificials));

        let mut a = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut unit_col = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = n + slacks;
        for (coeffs, cmp, b, sign) in rows {
            let mut row = coeffs;
            row.resize(cols, T::zero());
            match cmp {
                Cmp::Le => {
                    row[next_slack] = T::one();
                    basis.push(next_slack);
                    unit_col.push(next_slack);
                    next_slack += 1;
                }
                Cmp::Ge => {
                    row[next_slack] = -T::one();
                    next_slack += 1;
                    row[next_art] = T::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
                Cmp::Eq => {
                    row[next_art] = T::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
            }
            a.push(row);
            rhs.push(b);
            row_sign.push(sign);
        }
        Tableau { a, rhs, basis, kinds, unit_col, row_sign, pivots: 0 }
    }

    fn cols(&self) -> usize {
        self.kinds.len()
    }

    /// Reduced costs `c_j - c_B B^-1 A_j` for the given column costs.
    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let mut rc: Vec<T> = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, r) in rc.iter_mut().enumerate() {
                let aij = &self.a[i][j];
                if !aij.is_zero() {
                    *r = r.clone() - cb.clone() * aij.clone();
                }
            }
        }
        rc
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col].clone();
        for v in self.a[row].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() / p.clone();
            }
        }
        self.rhs[row] = self.rhs[row].clone() / p;
        let prow = self.a[row].clone();
        let prhs = self.rhs[row].clone();
        for i in 0..self.a.len() {
            if i == row {
                continue;
            }
            let f = self.a[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in self.a[i].iter_mut().zip(prow.iter()) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            self.a[i][col] = T::zero();
            self.rhs[i] = self.rhs[i].clone() - f * prhs.clone();
            if self.rhs[i].is_negative() && !self.rhs[i].is_neg() {
                // round-off below the tolerance
                self.rhs[i] = T::zero();
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Minimizes `cost` from the current basis. Columns for which `allowed`
    /// is false never enter.
    fn optimize(&mut self, cost: &[T], allowed: &dyn Fn(usize) -> bool) -> Result<(), LpError> {
        loop {
            if self.pivots >= PIVOT_LIMIT {
                return Err(LpError::PivotLimit(PIVOT_LIMIT));
            }
            let rc = self.reduced_costs(cost);
            // Bland: lowest-index improving column
            let Some(enter) = (0..self.cols()).find(|&j| allowed(j) && rc[j].is_neg()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.a.len() {
                let aij = &self.a[i][enter];
                if !aij.is_pos() {
                    continue;
                }
                let ratio = self.rhs[i].clone() / aij.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, enter);
        }
    }

    fn run(mut self, lp: &DenseLp<T>) -> Result<LpSolution<T>, LpError> {
        let n = lp.num_vars();
        let cols = self.cols();

        // phase 1: minimize the sum of artificials
        let has_art = self.kinds.contains(&ColKind::Artificial);
        if has_art {
            let cost: Vec<T> =
                self.kinds.iter().map(|k| if *k == ColKind::Artificial { T::one() } else { T::zero() }).collect();
            self.optimize(&cost, &|_| true)?;
            let infeas = self
                .basis
                .iter()
                .zip(self.rhs.iter())
                .filter(|(b, _)| self.kinds[**b] == ColKind::Artificial)
                .fold(T::zero(), |acc, (_, v)| acc + v.clone());
            if infeas.is_pos() {
                return Err(LpError::Infeasible);
            }
            // drive zero-level artificials out where a non-artificial pivot exists
            for i in 0..self.basis.len() {
                if self.kinds[self.basis[i]] != ColKind::Artificial {
                    continue;
                }
                if let Some(j) =
                    (0..cols).find(|&j| self.kinds[j] != ColKind::Artificial && self.a[i][j].abs() > T::tolerance())
                {
                    self.pivot(i, j);
                }
            }
        }

        // phase 2 on the original objective (as a minimization)
        let flip = lp.sense == Sense::Maximize;
        let mut cost = vec![T::zero(); cols];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = if flip { -c.clone() } else { c.clone() };
        }
        let kinds = self.kinds.clone();
        self.optimize(&cost, &|j| kinds[j] != ColKind::Artificial)?;

        let mut x = vec![T::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs[i].clone();
            }
        }
        let mut objective = T::zero();
        for (c, v) in lp.objective.iter().zip(x.iter()) {
            objective = objective + c.clone() * v.clone();
        }
        let rc = self.reduced_costs(&cost);
        let duals = (0..self.basis.len())
            .map(|i| {
                // c_unit = 0, so rc = -pi_i for the normalized row
                let pi = -rc[self.unit_col[i]].clone();
                let d = pi * self.row_sign[i].clone();
                if flip {
                    -d
                } else {
                    d
                }
            })
            .collect();
        Ok(LpSolution { x, objective, duals, pivots: self.pivots })
    }
}

/// Exact rational conversion of an `f64` problem.
pub fn to_rational(lp: &DenseLp<f64>) -> Option<DenseLp<BigRational>> {
    let conv = |v: &f64| BigRational::from_f64(*v);
    let objective = lp.objective.iter().map(conv).collect::<Option<Vec<_>>>()?;
    let rows = lp
        .rows
        .iter()
        .map(|r| {
            Some(LpRow {
                coeffs: r.coeffs.iter().map(conv).collect::<Option<Vec<_>>>()?,
                cmp: r.cmp,
                rhs: conv(&r.rhs)?,
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(DenseLp { sense: lp.sense, objective, rows })
}

pub fn rational_to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let mut lp = DenseLp::new(Sense::Maximize, vec![3.0, 5.0]);
        lp.add_row(vec![1.0, 0.0], Cmp::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Cmp::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Cmp::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!(approx(s.objective, 36.0));
        assert!(approx(s.x[0], 2.0) && approx(s.x[1], 6.0));
        // known shadow prices (0, 1.5, 1)
        assert!(approx(s.duals[0], 0.0) && approx(s.duals[1], 1.5) && approx(s.duals[2], 1.0));
    }

    #[test]
    fn covering_min_with_duals() {
        // min x + y, x + 2y >= 2, 3x + y >= 3 -> x = 0.8, y = 0.6, obj 1.4
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 2.0], Cmp::Ge, 2.0);
        lp.add_row(vec![3.0, 1.0], Cmp::Ge, 3.0);
        let s = lp.solve().unwrap();
        assert!(approx(s.objective, 1.4));
        let dual_obj: f64 = s.duals.iter().zip([2.0, 3.0]).map(|(y, b)| y * b).sum();
        assert!(approx(dual_obj, 1.4));
        assert!(s.duals.iter().all(|&y| y >= -1e-12));
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x - y, x + y = 2, -x <= -0.5  (x >= 0.5) -> x = 0.5, y = 1.5
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0, -1.0]);
        lp.add_row(vec![1.0, 1.0], Cmp::Eq, 2.0);
        lp.add_row(vec![-1.0, 0.0], Cmp::Le, -0.5);
        let s = lp.solve().unwrap();
        assert!(approx(s.objective, -1.0));
        assert!(approx(s.x[0], 0.5));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0]);
        lp.add_row(vec![1.0], Cmp::Le, 1.0);
        lp.add_row(vec![1.0], Cmp::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpError::Infeasible));

        let mut lp = DenseLp::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.add_row(vec![-1.0, 1.0], Cmp::Le, 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.add_row(vec![1.0, 1.0], Cmp::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], Cmp::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!(approx(s.objective, 1.0));
    }

    #[test]
    fn rational_mode_agrees() {
        let mut lp = DenseLp::new(Sense::Minimize, vec![2.0, 3.0, 1.0]);
        lp.add_row(vec![1.0, 1.0, 0.0], Cmp::Ge, 1.0);
        lp.add_row(vec![0.0, 1.0, 1.0], Cmp::Ge, 1.0);
        lp.add_row(vec![1.0, 0.0, 1.0], Cmp::Ge, 1.0);
        let f = lp.solve().unwrap();
        let q = to_rational(&lp).unwrap().solve().unwrap();
        // optimum 3, attained at (1, 0, 1) and (1/2, 1/2, 1/2)
        assert!(approx(f.objective, rational_to_f64(&q.objective)));
        assert_eq!(q.objective, BigRational::from_integer(3.into()));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let mut lp = DenseLp::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Cmp::Le, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Cmp::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Cmp::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!(approx(s.objective, -0.05));
    }
}
