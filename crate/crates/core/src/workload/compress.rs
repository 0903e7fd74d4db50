use super::{Workload, WorkloadError};

/// Shrinks every inter-arrival gap longer than `max_gap_ms` to exactly
/// `max_gap_ms`, shifting later arrivals; order is unchanged.
pub fn compress_idle_gaps(workload: &Workload, max_gap_ms: i64) -> Result<Workload, WorkloadError> {
    if max_gap_ms <= 0 {
        return Err(WorkloadError::InvalidGap);
    }
    let mut out = workload.clone();
    let mut prev_orig = None;
    let mut prev_new = 0;
    for q in &mut out.queries {
        let t = q.arrival_ms;
        if let Some(p) = prev_orig {
            let gap: i64 = t - p;
            q.arrival_ms = prev_new + gap.min(max_gap_ms);
        }
        prev_orig = Some(t);
        prev_new = q.arrival_ms;
    }
    Ok(out)
}
