//! Sparse elimination and incremental updates checked against dense and
//! batch oracles on random graphs.

mod common;

use common::{batch_oracle, dense_solve, gradient_norm, random_change, random_linear_graph, random_session};
use dynplan::graph::{eliminate, forward_ordering, linearize, min_degree_ordering};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sparse_solve_matches_dense_normal_equations(seed in any::<u64>()) {
        let (g, zero) = random_linear_graph(seed, 200);
        let lin = linearize(&g, &zero).unwrap();
        let keys: Vec<_> = zero.keys().copied().collect();
        let oracle = dense_solve(&lin, &keys, &zero);
        for ordering in [forward_ordering(keys.iter().copied()), min_degree_ordering(&g)] {
            let bt = eliminate(&lin, &ordering).unwrap();
            bt.check_invariants().unwrap();
            let delta = bt.solve();
            prop_assert!(delta.max_abs_diff(&oracle) < 1e-9, "diff {}", delta.max_abs_diff(&oracle));
            prop_assert!(gradient_norm(&lin, &delta) < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn incremental_sequences_match_batch_reelimination(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_session(&mut rng);
        let mut twin = s.clone();
        for _ in 0..rng.random_range(1..=5) {
            let (change, relin) = random_change(&mut rng, &s);
            let (_, report) = s.update(&change, &relin).unwrap();
            let (_, report2) = twin.update(&change, &relin).unwrap();
            prop_assert_eq!(report, report2);
            s.tree().check_invariants().unwrap();
            let oracle = batch_oracle(&s);
            let diff = s.delta().max_abs_diff(&oracle);
            prop_assert!(diff < 1e-10, "diff {}", diff);
            // deterministic replay, bit for bit
            prop_assert_eq!(s.delta(), twin.delta());
            if change.is_empty() && relin.is_empty() {
                prop_assert_eq!(report.reeliminated_keys, 0);
            }
        }
    }
}
