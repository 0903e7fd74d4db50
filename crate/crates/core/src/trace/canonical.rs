use std::io::Write;

use super::{TraceError, WorkloadTrace};

/// Header of the canonical trace CSV. `num_aggregates` is appended only when
/// at least one entry carries it.
pub const CANONICAL_COLUMNS: [&str; 9] = [
    "entry_id",
    "query_type",
    "arrival_ts_ms",
    "num_joins",
    "read_tables",
    "write_table",
    "runtime_ms",
    "bytes_read",
    "query_hash",
];

pub fn write_canonical<W: Write>(trace: &WorkloadTrace, out: W) -> Result<(), TraceError> {
    let with_aggregates = trace.entries().iter().any(|e| e.num_aggregates.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CANONICAL_COLUMNS.to_vec();
    if with_aggregates {
        header.push("num_aggregates");
    }
    w.write_record(&header)?;
    for e in trace.entries() {
        let reads = e
            .read_tables
            .iter()
            .map(|t| t.0.to_string())
            .collect::<Vec<_>>()
            .join("|");
        let mut record = vec![
            e.entry_id.to_string(),
            e.query_type.as_str().to_string(),
            e.arrival_ms.to_string(),
            e.num_joins.to_string(),
            reads,
            e.write_table.map(|t| t.0.to_string()).unwrap_or_default(),
            e.runtime_ms.to_string(),
            e.bytes_read.to_string(),
            e.query_hash.clone(),
        ];
        if with_aggregates {
            record.push(e.num_aggregates.map(|n| n.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
