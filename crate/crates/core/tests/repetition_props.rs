mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracesynth::features::{annotate_events_parallel, annotate_repetitions, events_from_trace};

use common::{random_trace, repetition_oracle};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn counts_match_prior_scan(seed in any::<u64>(), len in 1usize..30) {
        let trace = random_trace(&mut ChaCha8Rng::seed_from_u64(seed), len);
        let oracle = repetition_oracle(&trace);
        match annotate_repetitions(&trace) {
            Ok(r) => {
                prop_assert_eq!(r.select_count, oracle.selects);
                prop_assert_eq!(r.full_repetitions, oracle.full);
                prop_assert_eq!(r.scanset_repetitions, oracle.scan);
                prop_assert_eq!(r.full_repetitions_dml, oracle.full_dml);
                prop_assert_eq!(r.scanset_repetitions_dml, oracle.scan_dml);
            }
            Err(_) => prop_assert_eq!(oracle.selects, 0),
        }
    }

    #[test]
    fn parallel_pass_agrees(seed in any::<u64>(), len in 1usize..60) {
        let trace = random_trace(&mut ChaCha8Rng::seed_from_u64(seed), len);
        let events = events_from_trace(&trace);
        prop_assert_eq!(annotate_repetitions(&trace).ok(), annotate_events_parallel(&events).ok());
    }

    #[test]
    fn rates_are_ordered(seed in any::<u64>(), len in 1usize..40) {
        let trace = random_trace(&mut ChaCha8Rng::seed_from_u64(seed), len);
        if let Ok(r) = annotate_repetitions(&trace) {
            prop_assert!(r.qrr_dml <= r.qrr && r.qrr <= r.srr && r.srr <= 1.0);
            prop_assert!(r.srr_dml <= r.srr && r.qrr_dml <= r.srr_dml);
        }
    }
}

#[test]
fn bundled_fixtures() {
    let t = annotate_repetitions(&common::load_trace("four_rows.csv")).unwrap();
    assert_eq!((t.full_repetitions, t.full_repetitions_dml, t.select_count), (1, 0, 3));
    let r = annotate_repetitions(&common::load_trace("rrwrr.csv")).unwrap();
    assert_eq!((r.full_repetitions, r.full_repetitions_dml), (3, 2));
    assert_eq!(r.annotations[2].prior_entry_id, Some(1));
}
