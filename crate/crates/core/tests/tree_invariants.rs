mod common;

use std::sync::Arc;

use common::{tree_violations, StubEnv};
use mctspo::search::{Search, SearchConfig};
use mctspo::{Error, NetworkShape};
use proptest::prelude::*;

fn shape() -> Arc<NetworkShape> {
    Arc::new(NetworkShape::mlp(2, &[4], vec![1.0]))
}

fn traced(config: SearchConfig, seed: u64, limit: Option<u64>) -> Search<StubEnv> {
    let mut search = Search::new(StubEnv::new(6, limit), shape(), config, seed)
        .unwrap()
        .with_trace();
    loop {
        match search.simulate() {
            Ok(_) if search.simulations() < 400 => {}
            Ok(_) | Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => panic!("{e}"),
        }
    }
    search
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold_for_random_widening(k in 0.2f64..3.0, alpha in 0.1f64..1.0, seed in any::<u64>()) {
        let config = SearchConfig { widening_k: k, widening_alpha: alpha, ..Default::default() };
        let search = traced(config, seed, None);
        let bad = tree_violations(search.tree(), search.trace().unwrap(), k, alpha);
        prop_assert!(bad.is_empty(), "{:?}", &bad[..bad.len().min(5)]);
    }
}

#[test]
fn budget_exhaustion_leaves_a_consistent_tree() {
    // 6 calls per rollout: the limit lands mid-simulation many times over.
    for limit in [6, 60, 601, 1_000] {
        let search = traced(SearchConfig::default(), 3, Some(limit));
        assert!(search.env().calls <= limit + 5);
        let bad = tree_violations(search.tree(), search.trace().unwrap(), 0.5, 0.5);
        assert!(bad.is_empty(), "limit {limit}: {bad:?}");
        for n in search.tree().nodes() {
            assert!(n.samples > 0, "a rolled-back node stayed in the tree");
        }
    }
}

#[test]
fn depth_cap_stops_growth() {
    let config = SearchConfig {
        max_depth: Some(2),
        widening_k: 2.0,
        ..Default::default()
    };
    let search = traced(config, 11, None);
    assert!(search.tree().nodes().iter().all(|n| n.depth <= 2));
    assert!(search.tree().nodes().iter().any(|n| n.depth == 2));
}

#[test]
fn best_node_is_the_best_rollout() {
    let search = traced(SearchConfig::default(), 5, None);
    let best = search.tree().node(search.best_index()).rollout_return;
    let max = search.tree().nodes()[1..]
        .iter()
        .map(|n| n.rollout_return)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, max);
}
