//! Implicit trace features: repetition groups, per-table scan-size
//! estimates and temporal statistics, plus fidelity metrics that apply
//! equally to traces and synthesized workloads.

mod repetition;
mod scan;
mod temporal;

use thiserror::Error;

pub use repetition::{
    annotate_events, annotate_events_parallel, annotate_repetitions, annotate_workload, compare_workloads,
    events_from_trace, events_from_workload, AccessEvent, RepetitionAnnotation, RepetitionDelta, RepetitionReport,
};
pub use scan::{estimate_table_scan_sizes, ScansetBytes, TableScanEstimate, TraceTableStats};
pub use temporal::{temporal_profile, TemporalBucket, TemporalProfile};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    /// No select entries, so repetition rates are undefined.
    #[error("trace has no entries to measure")]
    EmptyTrace,
    #[error("bucket width must be positive")]
    InvalidBucketWidth,
}
