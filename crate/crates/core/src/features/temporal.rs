use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::trace::{QueryType, WorkloadTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalBucket {
    /// Inclusive lower bound, aligned to a multiple of the bucket width.
    pub start_ms: i64,
    pub count: usize,
    pub reads: usize,
    pub writes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub bucket_width_ms: i64,
    /// Every bucket between the first and last arrival, empty ones included.
    pub buckets: Vec<TemporalBucket>,
    /// Successive inter-arrival deltas.
    pub gaps_ms: Vec<i64>,
    pub read_count: usize,
    pub write_count: usize,
    /// reads / writes; `None` without writes.
    pub read_write_ratio: Option<f64>,
}

impl TemporalProfile {
    pub fn max_gap_ms(&self) -> Option<i64> {
        self.gaps_ms.iter().copied().max()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket_start_ms", "count", "reads", "writes"])?;
        for b in &self.buckets {
            w.write_record([
                b.start_ms.to_string(),
                b.count.to_string(),
                b.reads.to_string(),
                b.writes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn temporal_profile(trace: &WorkloadTrace, bucket_width_ms: i64) -> Result<TemporalProfile, FeatureError> {
    if bucket_width_ms <= 0 {
        return Err(FeatureError::InvalidBucketWidth);
    }
    let (first, last) = trace.span().ok_or(FeatureError::EmptyTrace)?;
    let origin = first.div_euclid(bucket_width_ms);
    let n = (last.div_euclid(bucket_width_ms) - origin + 1) as usize;
    let mut buckets: Vec<TemporalBucket> = (0..n)
        .map(|i| TemporalBucket {
            start_ms: (origin + i as i64) * bucket_width_ms,
            count: 0,
            reads: 0,
            writes: 0,
        })
        .collect();

    let (mut reads, mut writes) = (0, 0);
    for e in trace.entries() {
        let b = &mut buckets[(e.arrival_ms.div_euclid(bucket_width_ms) - origin) as usize];
        b.count += 1;
        if e.query_type == QueryType::Select {
            b.reads += 1;
            reads += 1;
        } else if e.query_type.is_dml() {
            b.writes += 1;
            writes += 1;
        }
    }
    let gaps_ms = trace
        .entries()
        .windows(2)
        .map(|w| w[1].arrival_ms - w[0].arrival_ms)
        .collect();

    Ok(TemporalProfile {
        bucket_width_ms,
        buckets,
        gaps_ms,
        read_count: reads,
        write_count: writes,
        read_write_ratio: (writes > 0).then(|| reads as f64 / writes as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::test_support::entry;
    use crate::trace::QueryType::*;

    const HOUR: i64 = 3_600_000;

    #[test]
    fn four_rows_hourly() {
        let trace = WorkloadTrace::sort_and_index(vec![
            entry(Select, 16 * HOUR, &[0, 1], None, "a62e"),
            entry(Insert, 18 * HOUR, &[0, 3], Some(1), "73b9"),
            entry(Select, 19 * HOUR, &[0, 1], None, "a62e"),
            entry(Select, 21 * HOUR, &[1], None, "962c"),
        ]);
        let p = temporal_profile(&trace, HOUR).unwrap();
        let nonempty: Vec<(i64, usize)> = p
            .buckets
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| (b.start_ms / HOUR, b.count))
            .collect();
        assert_eq!(nonempty, [(16, 1), (18, 1), (19, 1), (21, 1)]);
        assert_eq!(p.buckets.len(), 6);
        assert_eq!(p.buckets.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(p.read_write_ratio, Some(3.0));
        assert_eq!(p.gaps_ms, [2 * HOUR, HOUR, 2 * HOUR]);
    }

    #[test]
    fn single_entry() {
        let trace = WorkloadTrace::sort_and_index(vec![entry(Select, 5, &[0], None, "a")]);
        let p = temporal_profile(&trace, 1000).unwrap();
        assert_eq!(p.buckets.len(), 1);
        assert!(p.gaps_ms.is_empty());
        assert_eq!(p.read_write_ratio, None);
    }

    #[test]
    fn uniform_arrivals() {
        let trace =
            WorkloadTrace::sort_and_index((0..10).map(|i| entry(Select, i * 60_000, &[0], None, "a")).collect());
        let p = temporal_profile(&trace, 60_000).unwrap();
        assert!(p.buckets.iter().all(|b| b.count == 1));
        assert_eq!(p.buckets.len(), 10);
    }

    #[test]
    fn errors() {
        let trace = WorkloadTrace::sort_and_index(vec![]);
        assert_eq!(temporal_profile(&trace, 10), Err(FeatureError::EmptyTrace));
        assert_eq!(temporal_profile(&trace, 0), Err(FeatureError::InvalidBucketWidth));
    }
}
