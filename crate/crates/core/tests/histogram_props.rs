use proptest::prelude::*;
use tracesynth::catalog::{ColumnKind, Histogram, Value};

fn ints(mut v: Vec<i64>) -> Vec<Value> {
    v.sort();
    v.into_iter().map(Value::Int).collect()
}

proptest! {
    #[test]
    fn boundary_counts_are_exact(values in prop::collection::vec(-500i64..500, 1..400), buckets in 1usize..70) {
        let sorted = ints(values);
        let h = Histogram::build(&sorted, buckets);
        prop_assert_eq!(h.total() as usize, sorted.len());
        prop_assert!(h.buckets.len() <= buckets);
        for b in &h.buckets {
            let exact = sorted.iter().filter(|v| v.total_cmp(&b.upper).is_le()).count();
            prop_assert_eq!(h.estimate_le(ColumnKind::Integer, &b.upper), exact as f64);
        }
    }

    #[test]
    fn estimate_is_monotone(values in prop::collection::vec(0i64..1_000, 1..300), a in -10i64..1_010, d in 0i64..200) {
        let h = Histogram::build(&ints(values), 16);
        let lo = h.estimate_le(ColumnKind::Integer, &Value::Int(a));
        let hi = h.estimate_le(ColumnKind::Integer, &Value::Int(a + d));
        prop_assert!(lo <= hi);
        prop_assert!(hi <= h.total() as f64);
    }

    #[test]
    fn quantile_stays_in_domain(values in prop::collection::vec(0i64..1_000, 1..300), s in 0.0f64..=1.0) {
        let sorted = ints(values);
        let h = Histogram::build(&sorted, 32);
        let Value::Int(q) = h.quantile(ColumnKind::Integer, s).unwrap() else {
            return Err(TestCaseError::fail("non-integer quantile"));
        };
        let (min, max) = (sorted[0].as_i64().unwrap(), sorted.last().unwrap().as_i64().unwrap());
        prop_assert!(q >= min - 1 && q <= max + 1);
    }

    #[test]
    fn uniform_quantile_inverts(n in 100i64..3_000, s in 0.02f64..=1.0) {
        let h = Histogram::build(&ints((1..=n).collect()), 64);
        let q = h.quantile(ColumnKind::Integer, s).unwrap();
        let est = h.estimate_le(ColumnKind::Integer, &q) / n as f64;
        prop_assert!((est - s).abs() <= 1.0 / n as f64 + 1e-9);
    }
}

#[test]
fn empty_input() {
    let h = Histogram::build(&[], 8);
    assert_eq!(h.total(), 0);
    assert!(h.quantile(ColumnKind::Integer, 0.5).is_none());
}
