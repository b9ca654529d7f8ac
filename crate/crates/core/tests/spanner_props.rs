mod common;

use common::*;
use onspan::graph::{Demand, DirectedGraph, Distance};
use onspan::harness::{generate, is_quasimetric, run_instance, to_jsonl, GenSpec, GraphKind, RunOptions};
use onspan::paths::{distance_in_subgraph, local_graph};
use onspan::spanner::{params_for, Branch, ModeKind, SpannerMode, SpannerParams, SpannerRunState};
use proptest::prelude::*;

const MODES: [ModeKind; 5] =
    [ModeKind::General, ModeKind::BoundedD, ModeKind::Quasimetric, ModeKind::AllServer, ModeKind::SteinerForest];

fn kind_for(mode: ModeKind) -> GraphKind {
    match mode {
        ModeKind::Quasimetric => GraphKind::Quasimetric,
        ModeKind::AllServer => GraphKind::AllServer,
        _ => GraphKind::Random,
    }
}

fn params(mode: ModeKind, n: usize, seed: u64) -> SpannerParams {
    params_for(mode, n, Some(2), Some(0.1), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_mode_settles_every_demand(
        seed in any::<u64>(),
        mode_ix in 0usize..5,
        n in 2usize..=10,
        k in 1usize..=8,
        threshold in prop::option::of(1usize..4),
        thickness in 0.5f64..4.0,
    ) {
        let mode = MODES[mode_ix];
        let inst = generate(&GenSpec { kind: kind_for(mode), n, density: 0.35, demands: k, max_len: 4, seed }).unwrap();
        let g = &inst.graph;
        if mode == ModeKind::Quasimetric {
            prop_assert!(is_quasimetric(g));
        }
        let mut p = params(mode, n, seed);
        // small thresholds reach the rounding branches at this size
        if let Some(th) = threshold {
            p.threshold = th;
            p.thickness = thickness;
        }
        let mut st = SpannerRunState::new(g, p).unwrap();
        let mut prev_edges = st.spanner().clone();
        let mut prev_p = vec![0.0; g.edge_count()];
        for (i, dem) in inst.demands.iter().enumerate() {
            let out = st.process_demand(dem).unwrap();
            prop_assert_eq!(out.round, i + 1);
            let want = if out.round < p.threshold {
                Branch::Greedy
            } else if out.round == p.threshold {
                Branch::ArborescenceRound
            } else {
                Branch::ConditionalRound
            };
            prop_assert_eq!(out.branch, want);
            prop_assert!(out.settled);
            // reference check with an independent shortest-path routine
            let eff = st.effective(dem);
            let fw = floyd_warshall(g, |e| st.spanner().contains(e));
            for seen in st.demands() {
                prop_assert!(fw[seen.s][seen.t] != INF && fits(fw[seen.s][seen.t], seen.d));
            }
            prop_assert!(fits(fw[eff.s][eff.t], eff.d) && fw[eff.s][eff.t] != INF);
            prop_assert!(prev_edges.is_subset(st.spanner()));
            prop_assert_eq!(out.spanner_edges, st.spanner().len());
            prop_assert_eq!(out.edges_added, st.spanner().len() - prev_edges.len());
            prop_assert!(st.forced_edges().is_subset(st.spanner()));
            prop_assert!(st.marginals().iter().all(|&q| (0.0..=1.0).contains(&q)));
            prop_assert!(st.marginals().iter().zip(&prev_p).all(|(a, b)| a >= b));
            prev_edges = st.spanner().clone();
            prev_p = st.marginals().to_vec();
        }
        prop_assert!(st.all_settled().unwrap());
    }

    #[test]
    fn arborescence_roots_settle_their_local_graphs(seed in any::<u64>(), n in 3usize..=9, k in 2usize..=8) {
        let inst = generate(&GenSpec { kind: GraphKind::Random, n, density: 0.4, demands: k, max_len: 3, seed }).unwrap();
        let g = &inst.graph;
        let p = SpannerParams { mode: SpannerMode::General, threshold: 1, thickness: 1.0, seed };
        let mut st = SpannerRunState::new(g, p).unwrap();
        let mut roots = Vec::new();
        for dem in &inst.demands {
            let out = st.process_demand(dem).unwrap();
            if out.branch == Branch::ArborescenceRound {
                prop_assert!(!out.roots.is_empty());
                roots = out.roots.clone();
            }
            // a root inside the local graph makes repair unnecessary
            let local = local_graph(g, dem).unwrap();
            if roots.iter().any(|w| local.contains(w)) {
                prop_assert!(!out.repaired, "round {} repaired with root in local graph", out.round);
            }
        }
    }

    #[test]
    fn same_seed_same_log(seed in any::<u64>(), mode_ix in 0usize..5, n in 2usize..=8) {
        let mode = MODES[mode_ix];
        let inst = generate(&GenSpec { kind: kind_for(mode), n, density: 0.4, demands: 6, max_len: 4, seed }).unwrap();
        let mut p = params(mode, n, seed);
        p.threshold = 2;
        let a = to_jsonl(&run_instance(&inst.graph, &inst.demands, p, RunOptions::default()).unwrap()).unwrap();
        let b = to_jsonl(&run_instance(&inst.graph, &inst.demands, p, RunOptions::default()).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Two tight clusters joined by a bridge: pairs across the bridge have large
/// local graphs.
fn barbell() -> (DirectedGraph, Vec<Demand>) {
    let mut edges = Vec::new();
    for c in [0usize, 4] {
        for u in c..c + 4 {
            for v in c..c + 4 {
                if u != v {
                    edges.push((u, v, 1));
                }
            }
        }
    }
    edges.push((3, 4, 1));
    edges.push((4, 3, 1));
    let g = DirectedGraph::new(8, edges).unwrap();
    let demands = vec![
        Demand::new(0, 7, Distance::Finite(5)).unwrap(),
        Demand::new(1, 6, Distance::Finite(5)).unwrap(),
        Demand::new(7, 0, Distance::Finite(5)).unwrap(),
    ];
    (g, demands)
}

#[test]
fn thick_pairs_are_hit_by_sampled_roots() {
    let (g, demands) = barbell();
    let n = g.vertex_count();
    let thickness = 4.0;
    let local = local_graph(&g, &demands[0]).unwrap();
    assert!(local.len() as f64 >= thickness);
    let runs = 2000u64;
    let mut misses = 0;
    for seed in 0..runs {
        let p = SpannerParams { mode: SpannerMode::General, threshold: 1, thickness, seed };
        let mut st = SpannerRunState::new(&g, p).unwrap();
        let out = st.process_demand(&demands[0]).unwrap();
        if !out.roots.iter().any(|w| local.contains(w)) {
            misses += 1;
        }
        assert!(out.settled);
    }
    // a miss needs every draw outside V^i: (1 - |V^i|/n)^draws <= n^-3
    let draws = (3.0 * n as f64 * (n as f64).ln() / thickness).ceil();
    let bound = (1.0 - local.len() as f64 / n as f64).powf(draws);
    assert!(bound <= (n as f64).powi(-3) + 1e-12);
    let rate = misses as f64 / runs as f64;
    assert!(rate <= bound + 0.01, "miss rate {rate} vs bound {bound}");
}

#[test]
fn later_rounds_use_conditional_rounding() {
    let (g, demands) = barbell();
    let p = SpannerParams { mode: SpannerMode::General, threshold: 1, thickness: 2.0, seed: 11 };
    let mut st = SpannerRunState::new(&g, p).unwrap();
    let branches: Vec<Branch> = demands.iter().map(|d| st.process_demand(d).unwrap().branch).collect();
    assert_eq!(branches, vec![Branch::ArborescenceRound, Branch::ConditionalRound, Branch::ConditionalRound]);
    for d in &demands {
        assert!(distance_in_subgraph(&g, st.spanner(), d.s, d.t).unwrap().within(d.d));
    }
}

#[test]
fn steiner_forest_connects_regardless_of_distance() {
    let (g, _) = barbell();
    let p = params_for(ModeKind::SteinerForest, 8, None, Some(0.2), 5).unwrap();
    let mut st = SpannerRunState::new(&g, p).unwrap();
    // no path meets d = 1, connectivity alone counts
    let out = st.process_demand(&Demand::new(0, 7, Distance::Finite(1)).unwrap()).unwrap();
    assert!(out.settled);
    assert_eq!(distance_in_subgraph(&g, st.spanner(), 0, 7).unwrap(), Distance::Finite(3));
}
