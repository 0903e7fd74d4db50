//! In-memory trace model.
//!
//! A [`WorkloadTrace`] is an immutable, time-ordered sequence of
//! [`TraceEntry`] records. Entries only carry anonymized metrics: trace
//! table ids instead of table names, a query fingerprint instead of SQL text.

mod canonical;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{write_canonical, CANONICAL_COLUMNS};
pub use parse::{parse_trace, parse_trace_file, ColumnMapping, ParseMode, ParseOptions, ParsedTrace};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("column `{column}` named by the mapping config is absent from the header")]
    MissingColumn { column: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("trace contains no valid rows")]
    EmptyTrace,
    #[error("invalid column mapping: {0}")]
    InvalidMapping(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Statement class of a trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Select,
    Insert,
    Update,
    Delete,
    Other,
}

impl QueryType {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::Select => "select",
            QueryType::Insert => "insert",
            QueryType::Update => "update",
            QueryType::Delete => "delete",
            QueryType::Other => "other",
        }
    }

    /// Insert, update or delete.
    pub fn is_dml(self) -> bool {
        matches!(self, QueryType::Insert | QueryType::Update | QueryType::Delete)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = String;

    /// Accepts the canonical names case-insensitively. Provider-specific
    /// statement classes (copy, analyze, ctas, vacuum, ...) fold into `Other`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty query type".into());
        }
        Ok(match s.to_ascii_lowercase().as_str() {
            "select" => QueryType::Select,
            "insert" => QueryType::Insert,
            "update" => QueryType::Update,
            "delete" => QueryType::Delete,
            _ => QueryType::Other,
        })
    }
}

/// Anonymized trace table identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TableId(pub u32);

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Set of trace tables read by one query.
pub type Scanset = BTreeSet<TableId>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub entry_id: usize,
    pub query_type: QueryType,
    /// Milliseconds; the epoch is whatever the source uses.
    pub arrival_ms: i64,
    pub num_joins: u32,
    pub read_tables: Scanset,
    pub write_table: Option<TableId>,
    pub runtime_ms: u64,
    pub bytes_read: u64,
    pub query_hash: String,
    /// Aggregate count, when the source trace provides one.
    pub num_aggregates: Option<u32>,
}

impl TraceEntry {
    pub fn is_select(&self) -> bool {
        self.query_type == QueryType::Select
    }

    /// A written table on any entry type (DML or `other`) invalidates
    /// cached results over it.
    pub fn invalidates(&self) -> Option<TableId> {
        match self.query_type {
            QueryType::Select => None,
            _ => self.write_table,
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        match self.query_type {
            QueryType::Select if self.write_table.is_some() => return Err("select entry carries a write table".into()),
            t if t.is_dml() && self.write_table.is_none() => return Err(format!("{t} entry has no write table")),
            _ => {}
        }
        if self.read_tables.is_empty() && self.query_type != QueryType::Other {
            return Err(format!("{} entry has an empty scanset", self.query_type));
        }
        Ok(())
    }
}

/// Time-ordered trace. Entry ids are dense `0..n` in arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    entries: Vec<TraceEntry>,
    table_ids: BTreeSet<TableId>,
}

impl WorkloadTrace {
    /// Stable sort by arrival time (ties keep input order) and dense
    /// re-indexing.
    pub fn sort_and_index(mut entries: Vec<TraceEntry>) -> Self {
        entries.sort_by_key(|e| e.arrival_ms);
        let mut table_ids = BTreeSet::new();
        for (i, e) in entries.iter_mut().enumerate() {
            e.entry_id = i;
            table_ids.extend(e.read_tables.iter().copied());
            table_ids.extend(e.write_table);
        }
        WorkloadTrace { entries, table_ids }
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn table_ids(&self) -> &BTreeSet<TableId> {
        &self.table_ids
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, entry_id: usize) -> Option<&TraceEntry> {
        self.entries.get(entry_id)
    }

    pub fn selects(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.is_select())
    }

    /// Arrival span `(first, last)`, or `None` on an empty trace.
    pub fn span(&self) -> Option<(i64, i64)> {
        Some((self.entries.first()?.arrival_ms, self.entries.last()?.arrival_ms))
    }

    /// SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_canonical(self, &mut buf).expect("writing to a Vec cannot fail");
        crate::digest::sha256_hex(&buf)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn entry(query_type: QueryType, arrival_ms: i64, reads: &[u32], write: Option<u32>, hash: &str) -> TraceEntry {
        TraceEntry {
            entry_id: 0,
            query_type,
            arrival_ms,
            num_joins: reads.len().saturating_sub(1) as u32,
            read_tables: reads.iter().map(|&t| TableId(t)).collect(),
            write_table: write.map(TableId),
            runtime_ms: 100,
            bytes_read: 1_000,
            query_hash: hash.to_string(),
            num_aggregates: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::entry;
    use super::*;

    #[test]
    fn sort_orders_by_arrival() {
        let trace = WorkloadTrace::sort_and_index(vec![
            entry(QueryType::Select, 19 * 3_600_000, &[0], None, "late"),
            entry(QueryType::Select, 16 * 3_600_000, &[0], None, "early"),
        ]);
        let hashes: Vec<_> = trace.entries().iter().map(|e| e.query_hash.as_str()).collect();
        assert_eq!(hashes, ["early", "late"]);
        assert_eq!(trace.entries()[0].entry_id, 0);
        assert_eq!(trace.entries()[1].entry_id, 1);
    }

    #[test]
    fn sort_is_stable_for_ties_and_idempotent() {
        let input = vec![
            entry(QueryType::Select, 5, &[0], None, "a"),
            entry(QueryType::Select, 5, &[1], None, "b"),
            entry(QueryType::Select, 7, &[1], None, "c"),
        ];
        let once = WorkloadTrace::sort_and_index(input);
        let hashes: Vec<_> = once.entries().iter().map(|e| e.query_hash.clone()).collect();
        assert_eq!(hashes, ["a", "b", "c"]);
        let twice = WorkloadTrace::sort_and_index(once.entries().to_vec());
        assert_eq!(once, twice);
    }

    #[test]
    fn invariants() {
        assert!(entry(QueryType::Select, 0, &[0], Some(1), "x")
            .check_invariants()
            .is_err());
        assert!(entry(QueryType::Insert, 0, &[0], None, "x").check_invariants().is_err());
        assert!(entry(QueryType::Update, 0, &[], Some(1), "x")
            .check_invariants()
            .is_err());
        assert!(entry(QueryType::Other, 0, &[], None, "x").check_invariants().is_ok());
        assert!(entry(QueryType::Delete, 0, &[2], Some(2), "x")
            .check_invariants()
            .is_ok());
    }

    #[test]
    fn query_type_folds_unknown_into_other() {
        assert_eq!("SELECT".parse::<QueryType>(), Ok(QueryType::Select));
        assert_eq!("copy".parse::<QueryType>(), Ok(QueryType::Other));
        assert!("".parse::<QueryType>().is_err());
    }
}
