use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trace::{TableId, WorkloadTrace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableScanEstimate {
    pub table: TableId,
    /// Largest `bytes_read` of any select reading only this table; 0 when
    /// the table was never scanned alone.
    pub max_single_table_scan_bytes: u64,
    pub estimated: bool,
    /// Largest `bytes_read` of any select whose scanset contains the table.
    pub max_any_scan_bytes: u64,
    /// Number of entries reading or writing the table.
    pub access_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScansetBytes {
    pub scanset: Vec<TableId>,
    pub select_count: usize,
    pub mean_bytes_read: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTableStats {
    pub tables: BTreeMap<TableId, TableScanEstimate>,
    pub scansets: Vec<ScansetBytes>,
}

impl TraceTableStats {
    pub fn get(&self, table: TableId) -> Option<&TableScanEstimate> {
        self.tables.get(&table)
    }

    /// Size signal used to scale byte targets: the single-table estimate when
    /// available, else the largest scan the table took part in.
    pub fn size_signal(&self, table: TableId) -> u64 {
        match self.tables.get(&table) {
            Some(t) if t.estimated => t.max_single_table_scan_bytes,
            Some(t) => t.max_any_scan_bytes,
            None => 0,
        }
    }
}

pub fn estimate_table_scan_sizes(trace: &WorkloadTrace) -> TraceTableStats {
    let mut tables: BTreeMap<TableId, TableScanEstimate> = trace
        .table_ids()
        .iter()
        .map(|&t| {
            (
                t,
                TableScanEstimate {
                    table: t,
                    max_single_table_scan_bytes: 0,
                    estimated: false,
                    max_any_scan_bytes: 0,
                    access_count: 0,
                },
            )
        })
        .collect();
    let mut by_scanset: BTreeMap<Vec<TableId>, (usize, u128)> = BTreeMap::new();

    for e in trace.entries() {
        let mut touched: Vec<TableId> = e.read_tables.iter().copied().collect();
        if let Some(w) = e.write_table {
            if !e.read_tables.contains(&w) {
                touched.push(w);
            }
        }
        for t in &touched {
            if let Some(est) = tables.get_mut(t) {
                est.access_count += 1;
            }
        }
        if !e.is_select() {
            continue;
        }
        for t in &e.read_tables {
            let est = tables.get_mut(t).expect("trace table ids cover every scanset");
            est.max_any_scan_bytes = est.max_any_scan_bytes.max(e.bytes_read);
        }
        if e.read_tables.len() == 1 {
            let t = e.read_tables.iter().next().unwrap();
            let est = tables.get_mut(t).unwrap();
            est.estimated = true;
            est.max_single_table_scan_bytes = est.max_single_table_scan_bytes.max(e.bytes_read);
        }
        let slot = by_scanset
            .entry(e.read_tables.iter().copied().collect())
            .or_insert((0, 0));
        slot.0 += 1;
        slot.1 += e.bytes_read as u128;
    }

    let scansets = by_scanset
        .into_iter()
        .map(|(scanset, (n, sum))| ScansetBytes {
            scanset,
            select_count: n,
            mean_bytes_read: sum as f64 / n as f64,
        })
        .collect();
    TraceTableStats { tables, scansets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::test_support::entry;
    use crate::trace::QueryType::*;

    fn with_bytes(mut e: crate::trace::TraceEntry, bytes: u64) -> crate::trace::TraceEntry {
        e.bytes_read = bytes;
        e
    }

    fn four_rows() -> WorkloadTrace {
        WorkloadTrace::sort_and_index(vec![
            with_bytes(entry(Select, 0, &[0, 1], None, "a62e"), 9_000_000),
            with_bytes(entry(Insert, 1, &[0, 3], Some(1), "73b9"), 40_000_000),
            with_bytes(entry(Select, 2, &[0, 1], None, "a62e"), 9_000_000),
            with_bytes(entry(Select, 3, &[1], None, "962c"), 78_000_000),
        ])
    }

    #[test]
    fn single_table_estimate_from_four_rows() {
        let stats = estimate_table_scan_sizes(&four_rows());
        let t1 = stats.get(TableId(1)).unwrap();
        assert!(t1.estimated);
        assert_eq!(t1.max_single_table_scan_bytes, 78_000_000);
        let t0 = stats.get(TableId(0)).unwrap();
        assert!(!t0.estimated);
        assert_eq!(t0.max_single_table_scan_bytes, 0);
        assert_eq!(t0.max_any_scan_bytes, 9_000_000);
        assert_eq!(stats.size_signal(TableId(0)), 9_000_000);
    }

    #[test]
    fn max_semantics() {
        let trace = WorkloadTrace::sort_and_index(vec![
            with_bytes(entry(Select, 0, &[1], None, "a"), 78_000_000),
            with_bytes(entry(Select, 1, &[1], None, "b"), 10_000_000),
        ]);
        let stats = estimate_table_scan_sizes(&trace);
        assert_eq!(stats.get(TableId(1)).unwrap().max_single_table_scan_bytes, 78_000_000);
        assert_eq!(stats.scansets[0].mean_bytes_read, 44_000_000.0);
    }

    #[test]
    fn access_counts_include_writes() {
        let stats = estimate_table_scan_sizes(&four_rows());
        assert_eq!(stats.get(TableId(1)).unwrap().access_count, 4);
        assert_eq!(stats.get(TableId(3)).unwrap().access_count, 1);
        assert_eq!(stats.get(TableId(0)).unwrap().access_count, 3);
    }
}
