#![allow(clippy::needless_range_loop)]

mod common;

use common::rng;
use num::BigRational;
use onspan::covering::{ConstraintRow, CoveringCost, CoveringState};
use onspan::oracles::{covering_lp, exact_covering_lp};
use onspan::packing::PackingState;
use onspan::simplex::{rational_to_f64, to_rational, DenseLp, LpSolution};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const REL: f64 = 1e-9;

fn random_rows(r: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<ConstraintRow> {
    (0..count)
        .map(|_| {
            let mut a: Vec<f64> =
                (0..n).map(|_| if r.random_bool(0.4) { r.random_range(0.1..3.0) } else { 0.0 }).collect();
            if a.iter().all(|&v| v == 0.0) {
                a[r.random_range(0..n)] = r.random_range(0.1..3.0);
            }
            ConstraintRow::from_dense(&a).unwrap()
        })
        .collect()
}

fn random_covering(seed: u64, n: usize, rows: usize) -> (CoveringCost, Vec<ConstraintRow>) {
    let mut r = rng(seed);
    let c = CoveringCost::new((0..n).map(|_| r.random_range(0.2..5.0)).collect()).unwrap();
    let rows = random_rows(&mut r, n, rows);
    (c, rows)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn covering_phase_claims(seed in any::<u64>(), n in 1usize..=10, m in 1usize..=20) {
        let (c, rows) = random_covering(seed, n, m);
        let mut st = CoveringState::new(c.clone());
        let ln2n = (2.0 * n as f64).ln();
        let mut prev = vec![0.0; n];
        for (i, row) in rows.iter().enumerate() {
            let rep = st.process(row).unwrap();
            // monotone solution, every seen row satisfied
            prop_assert!(st.solution().iter().zip(&prev).all(|(a, b)| a >= b));
            prev = st.solution().to_vec();
            for seen in &rows[..=i] {
                prop_assert!(seen.dot(st.solution()) >= 1.0 - REL);
            }
            let last_x = st.phases().last().unwrap().x();
            if rep.grown_to_two {
                // coverage went from below 1 to 2 inside one phase
                prop_assert!(!rep.variables_doubled.is_empty());
                prop_assert!(row.dot(last_x) >= 2.0 * (1.0 - REL));
            } else if rep.violated {
                prop_assert!(rep.phases_started >= 1);
                prop_assert!(row.dot(last_x) >= 1.0);
            } else {
                prop_assert_eq!(rep.phases_started, 0);
                prop_assert_eq!(rep.y_assigned, 0.0);
            }
        }
        let phases = st.phases();
        let last = phases.last().unwrap().alpha();
        for (r, ph) in phases.iter().enumerate() {
            if r > 0 {
                prop_assert_eq!(ph.alpha(), 2.0 * phases[r - 1].alpha());
            }
            // within a phase the objective stays under alpha
            prop_assert!(ph.objective(&c) <= ph.alpha() * (1.0 + REL));
            // per-phase duals are packing-feasible
            for (j, &l) in ph.load().iter().enumerate() {
                prop_assert!(l <= c.as_slice()[j] * (1.0 + 1e-7), "load {} > c {}", l, c.as_slice()[j]);
            }
            if r + 1 < phases.len() {
                prop_assert!(ph.alpha() <= 4.0 * ln2n * ph.dual_total() * (1.0 + 1e-6));
            }
        }
        let total: f64 = phases.iter().map(|p| p.alpha()).sum();
        prop_assert!(total <= 2.0 * last * (1.0 + REL));
        prop_assert!(st.objective() <= 2.0 * last * (1.0 + REL));

        let opt = exact_covering_lp(&c, &rows).unwrap();
        prop_assert!(st.objective() <= 16.0 * ln2n * opt * (1.0 + REL));
    }

    #[test]
    fn packing_claims(seed in any::<u64>(), n in 1usize..=10, m in 1usize..=20, b in 0.2f64..6.0) {
        let mut r = rng(seed);
        let c: Vec<f64> = (0..n).map(|_| r.random_range(0.2..5.0)).collect();
        let cols = random_rows(&mut r, n, m);
        let mut st = PackingState::new(c.clone(), b).unwrap();
        let mut fixed: Vec<f64> = Vec::new();
        let mut prev_x = vec![0.0; n];
        for col in &cols {
            let covered = col.dot(st.x()) >= 1.0;
            let y = st.process_column(col).unwrap();
            prop_assert!(y >= 0.0);
            if covered {
                prop_assert_eq!(y, 0.0);
            } else {
                prop_assert!(col.dot(st.x()) >= 2.0 * (1.0 - REL));
            }
            fixed.push(y);
            // earlier values never move
            prop_assert_eq!(st.y(), &fixed[..]);
            prop_assert!(st.x().iter().zip(&prev_x).all(|(a, b)| a >= b));
            prev_x = st.x().to_vec();
            for j in 0..n {
                if let Some(amin) = st.a_min(j) {
                    prop_assert!(st.x()[j] <= 2.0 / amin * (1.0 + 1e-7));
                } else {
                    prop_assert_eq!(st.x()[j], 0.0);
                }
            }
            let rep = st.report();
            prop_assert!(rep.objective >= rep.covering_objective / b * (1.0 - 1e-7));
        }
        for j in 0..n {
            prop_assert!(st.load()[j] <= st.load_bound(j) * (1.0 + 1e-7) + 1e-12);
        }
        let scaled = st.scaled_y();
        for j in 0..n {
            let load: f64 = cols.iter().zip(&scaled).map(|(col, y)| col.to_dense(n)[j] * y).sum();
            prop_assert!(load <= c[j] * (1.0 + 1e-9), "row {}: {} > {}", j, load, c[j]);
        }
    }
}

#[test]
fn exact_covering_matches_rational_solver() {
    for seed in 0..40 {
        let (c, rows) = random_covering(seed, 5, 8);
        let lp = covering_lp(&c, &rows);
        let float = exact_covering_lp(&c, &rows).unwrap();
        let rational: DenseLp<BigRational> = to_rational(&lp).unwrap();
        let sol: LpSolution<BigRational> = rational.solve().unwrap();
        let exact = rational_to_f64(&sol.objective);
        assert!((float - exact).abs() <= 1e-9 * exact.max(1.0), "seed {seed}: {float} vs {exact}");
        // primal feasibility of the rational optimum
        for row in &rows {
            let dot: BigRational =
                row.to_dense(c.len()).iter().zip(&sol.x).map(|(a, x)| BigRational::from_float(*a).unwrap() * x).sum();
            assert!(dot >= BigRational::from_integer(1.into()));
        }
    }
}

#[test]
fn identity_rows_cost_the_sum() {
    let c = CoveringCost::new(vec![1.5, 2.0, 0.5]).unwrap();
    let rows: Vec<_> = (0..3)
        .map(|j| {
            let mut a = vec![0.0; 3];
            a[j] = 1.0;
            ConstraintRow::from_dense(&a).unwrap()
        })
        .collect();
    assert!((exact_covering_lp(&c, &rows).unwrap() - 4.0).abs() < 1e-12);
    let mut st = CoveringState::new(c.clone());
    for r in &rows {
        st.process(r).unwrap();
    }
    assert!(st.objective() <= 16.0 * 6f64.ln() * 4.0);
}

#[test]
fn oracle_replay_stops_once_satisfied() {
    let c = CoveringCost::new(vec![1.0, 2.0]).unwrap();
    let row = ConstraintRow::from_dense(&[0.5, 0.25]).unwrap();
    let mut st = CoveringState::new(c);
    let fixes = st.process_with_oracle(|x| (row.dot(x) < 1.0).then(|| row.clone())).unwrap();
    assert_eq!(fixes, 1);
    assert!(row.dot(st.solution()) >= 1.0);
}

#[test]
fn packing_single_row_closed_form() {
    for b in [0.5, 1.0, 3.0, 7.0] {
        let mut st = PackingState::new(vec![1.0], b).unwrap();
        let y = st.process_column(&ConstraintRow::from_dense(&[1.0]).unwrap()).unwrap();
        // (exp(B y / 3) - 1) = 2
        assert!((y - 3.0 * 3f64.ln() / b).abs() < 1e-8, "B = {b}: y = {y}");
    }
}
