//! Synthesized workloads: the model, the line-delimited JSON format, the
//! round-robin baseline and idle-gap compression.

mod baseline;
mod compress;
mod io;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::sql::leading_verb;
use crate::trace::QueryType;

pub use baseline::{ratio_pattern, round_robin_baseline, BaselineSummary, Slot};
pub use compress::compress_idle_gaps;
pub use io::{emit_workload, load_workload, read_workload_file, write_workload_file, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("query pool is empty")]
    EmptyPool,
    #[error("max gap must be positive")]
    InvalidGap,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthesisMode {
    Matching,
    Generation,
    Baseline,
}

impl SynthesisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthesisMode::Matching => "matching",
            SynthesisMode::Generation => "generation",
            SynthesisMode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthesisMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matching" => Ok(SynthesisMode::Matching),
            "generation" => Ok(SynthesisMode::Generation),
            "baseline" => Ok(SynthesisMode::Baseline),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Where a statement came from. Serialized as `generated`, `baseline` or
/// `matched:<template_id>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Matched(usize),
    Generated,
    Baseline,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Matched(id) => write!(f, "matched:{id}"),
            Provenance::Generated => f.write_str("generated"),
            Provenance::Baseline => f.write_str("baseline"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generated" => Ok(Provenance::Generated),
            "baseline" => Ok(Provenance::Baseline),
            _ => s
                .strip_prefix("matched:")
                .and_then(|id| id.parse().ok())
                .map(Provenance::Matched)
                .ok_or_else(|| format!("bad provenance `{s}`")),
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFlag {
    /// No backend was available to check for empty results.
    Unvalidated,
    /// Repair rounds exhausted; all predicates dropped.
    FullScanFallback,
    /// Byte target exceeded the mapped tables; budgets were clamped.
    Shortfall,
    /// Predicates were widened until the result was non-empty.
    Repaired,
    DisconnectedStart,
    NoEligibleColumn,
    NoStagingTwin,
    FallbackMinimalDml,
    NoopDml,
    /// The pool held fewer distinct selects than requested.
    PoolWrapped,
    /// A template's instantiations ran out and an earlier one was reused.
    ReusedInstance,
    /// The insert's read component does not reach the written table.
    DetachedRead,
}

pub const ALL_FLAGS: [QueryFlag; 12] = [
    QueryFlag::Unvalidated,
    QueryFlag::FullScanFallback,
    QueryFlag::Shortfall,
    QueryFlag::Repaired,
    QueryFlag::DisconnectedStart,
    QueryFlag::NoEligibleColumn,
    QueryFlag::NoStagingTwin,
    QueryFlag::FallbackMinimalDml,
    QueryFlag::NoopDml,
    QueryFlag::PoolWrapped,
    QueryFlag::ReusedInstance,
    QueryFlag::DetachedRead,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesizedQuery {
    pub seq: usize,
    #[serde(rename = "arrival_ts_ms")]
    pub arrival_ms: i64,
    #[serde(rename = "type")]
    pub query_type: QueryType,
    pub sql: String,
    pub source_entry_id: Option<usize>,
    pub provenance: Provenance,
    pub flags: BTreeSet<QueryFlag>,
    /// Schema tables the statement reads, sorted.
    pub read_tables: Vec<String>,
    pub write_table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadMetadata {
    pub mode: SynthesisMode,
    pub seed: u64,
    pub trace_fingerprint: String,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub metadata: WorkloadMetadata,
    pub queries: Vec<SynthesizedQuery>,
}

/// Leading verbs a statement of the given type may start with. Minimal DML
/// replaces inserts and updates by a delete-and-reinsert pair.
fn verb_allowed(query_type: QueryType, verb: &str) -> bool {
    match query_type {
        QueryType::Select => matches!(verb, "select" | "with"),
        QueryType::Insert => matches!(verb, "insert" | "delete"),
        QueryType::Update => matches!(verb, "update" | "delete"),
        QueryType::Delete => verb == "delete",
        QueryType::Other => true,
    }
}

impl Workload {
    pub fn new(metadata: WorkloadMetadata, queries: Vec<SynthesizedQuery>) -> Self {
        Workload { metadata, queries }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Checks dense sequence numbers, ordered arrivals and statement verbs.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (i, q) in self.queries.iter().enumerate() {
            if q.seq != i {
                return Err(WorkloadError::Invalid(format!("seq {} at position {i}", q.seq)));
            }
            if i > 0 && q.arrival_ms < self.queries[i - 1].arrival_ms {
                return Err(WorkloadError::Invalid(format!("arrival time decreases at seq {i}")));
            }
            let verb =
                leading_verb(&q.sql).ok_or_else(|| WorkloadError::Invalid(format!("empty statement at seq {i}")))?;
            if !verb_allowed(q.query_type, &verb) {
                return Err(WorkloadError::Invalid(format!(
                    "seq {i}: {} statement starts with `{verb}`",
                    q.query_type
                )));
            }
        }
        Ok(())
    }

    /// Count of queries carrying each flag.
    pub fn flag_counts(&self) -> std::collections::BTreeMap<QueryFlag, usize> {
        let mut out = std::collections::BTreeMap::new();
        for q in &self.queries {
            for f in &q.flags {
                *out.entry(*f).or_insert(0) += 1;
            }
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn provenance_strings() {
        for p in [Provenance::Matched(12), Provenance::Generated, Provenance::Baseline] {
            assert_eq!(p.to_string().parse::<Provenance>(), Ok(p));
        }
        assert!("matched:x".parse::<Provenance>().is_err());
    }

    #[test]
    fn validation() {
        let ok = Workload::new(
            metadata(),
            vec![
                query(0, 0, QueryType::Select, "SELECT 1", &[], None),
                query(
                    1,
                    5,
                    QueryType::Insert,
                    "DELETE FROM t WHERE id = 1; INSERT INTO t VALUES (1)",
                    &[],
                    Some("t"),
                ),
            ],
        );
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.queries[1].arrival_ms = -1;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.queries[0].sql = "UPDATE t SET a = a".into();
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.queries[1].seq = 3;
        assert!(bad.validate().is_err());
    }
}
