mod common;

use common::*;
use crossfit::dependence::TwoWayClusters;
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn as_independent_partitions(n in 2usize..500, k in 2usize..12, seed: u64) {
        prop_assume!(k <= n);
        prop_assert_eq!(check_as_independent(n, k, seed), Ok(()));
    }

    #[test]
    fn two_way_excludes_shared_rows_and_columns(rows in 2usize..20, cols in 2usize..20, k in 2usize..5, seed: u64) {
        prop_assume!(k <= rows.min(cols));
        let (mut r, mut c) = (Vec::new(), Vec::new());
        for i in 0..rows {
            for j in 0..cols {
                r.push(i);
                c.push(j);
            }
        }
        let clusters = TwoWayClusters::new(r, c).unwrap();
        prop_assert_eq!(check_two_way(&clusters, k, seed), Ok(()));
    }

    #[test]
    fn network_lno_drops_neighbors(n in 4usize..300, c in 0.0f64..6.0, k in 2usize..6, seed: u64, graph_seed: u64) {
        prop_assume!(k <= n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(graph_seed);
        let adj = random_graph(&mut rng, n, c);
        prop_assert_eq!(check_network_lno(&adj, k, seed), Ok(()));
    }

    #[test]
    fn nlo_respects_the_gap(t in 2usize..500, k in 2usize..10, gap in 0usize..8) {
        prop_assume!(k <= t);
        prop_assert_eq!(check_nlo(t, k, gap), Ok(()));
    }
}

#[test]
fn suite_over_random_configurations() {
    for (scheme, count, fails) in splitter_suite(11, 100) {
        assert!(count >= 100);
        assert!(fails.is_empty(), "{scheme}: {fails:?}");
    }
}

#[test]
fn zero_gap_nlo_is_contiguous_complement() {
    let plan = crossfit::splitters::nlo_split(12, 3, 0, 0).unwrap();
    for fold in &plan.folds {
        assert_eq!(fold.eval.len() + fold.train.len(), 12);
    }
}
