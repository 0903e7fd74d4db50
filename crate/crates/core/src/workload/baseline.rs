use std::collections::{BTreeSet, HashSet};

use super::{Provenance, QueryFlag, SynthesizedQuery, Workload, WorkloadError, WorkloadMetadata};
use crate::catalog::{SchemaCatalog, TableMapping};
use crate::matching::{delete_reinsert, QueryPool};
use crate::trace::{QueryType, WorkloadTrace};

/// What the baseline keeps from a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineSummary {
    /// Distinct (hash, scanset) pairs among selects.
    pub unique_selects: usize,
    /// Trace selects in order; the k-th baseline read borrows the k-th one's
    /// runtime.
    pub select_ids: Vec<usize>,
    /// Trace insert/update/delete entries in order.
    pub dml_ids: Vec<usize>,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl BaselineSummary {
    pub fn from_trace(trace: &WorkloadTrace) -> BaselineSummary {
        let mut unique = HashSet::new();
        let mut select_ids = Vec::new();
        let mut dml_ids = Vec::new();
        for e in trace.entries() {
            if e.is_select() {
                unique.insert((&e.query_hash, &e.read_tables));
                select_ids.push(e.entry_id);
            } else if e.query_type.is_dml() {
                dml_ids.push(e.entry_id);
            }
        }
        let (start_ms, end_ms) = trace.span().unwrap_or((0, 0));
        BaselineSummary {
            unique_selects: unique.len(),
            select_ids,
            dml_ids,
            start_ms,
            end_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Read,
    Write,
}

/// Fixed read/write pattern of period at most 10 approximating the ratio:
/// `p` reads then `q` writes.
pub fn ratio_pattern(reads: usize, writes: usize) -> Vec<Slot> {
    match (reads, writes) {
        (0, 0) => return vec![],
        (_, 0) => return vec![Slot::Read],
        (0, _) => return vec![Slot::Write],
        _ => {}
    }
    let f = reads as f64 / (reads + writes) as f64;
    let mut best = (f64::INFINITY, 0, 0);
    for period in 2..=10 {
        for p in 1..period {
            let err = (p as f64 / period as f64 - f).abs();
            if err < best.0 - 1e-12 {
                best = (err, p, period - p);
            }
        }
    }
    let (_, p, q) = best;
    std::iter::repeat_n(Slot::Read, p)
        .chain(std::iter::repeat_n(Slot::Write, q))
        .collect()
}

/// Round-robin control workload: cycles through distinct pool selects with a
/// fixed read/write pattern, uniformly spaced over the trace span. Writes
/// delete and reinsert one row, cycling over the mapped and pool tables.
pub fn round_robin_baseline(
    summary: &BaselineSummary,
    pool: &QueryPool,
    catalog: &SchemaCatalog,
    mapping: Option<&TableMapping>,
    metadata: WorkloadMetadata,
) -> Result<Workload, WorkloadError> {
    if pool.is_empty() {
        return Err(WorkloadError::EmptyPool);
    }
    let reads = summary.select_ids.len();
    let writes = summary.dml_ids.len();
    let pattern = ratio_pattern(reads, writes);
    let total = reads + writes;

    let wanted = summary.unique_selects.max(1);
    let mut selects: Vec<(usize, &str)> = Vec::new();
    let mut seen = HashSet::new();
    let depth = pool.templates.iter().map(|t| t.instantiations.len()).max().unwrap_or(0);
    'fill: for inst in 0..depth {
        for t in &pool.templates {
            if let Some(sql) = t.instantiations.get(inst) {
                if seen.insert(sql.as_str()) {
                    selects.push((t.template_id, sql));
                    if selects.len() == wanted {
                        break 'fill;
                    }
                }
            }
        }
    }
    let wrapped = selects.len() < wanted;
    if wrapped {
        log::warn!(
            "pool holds {} distinct selects, {} requested; wrapping",
            selects.len(),
            wanted
        );
    }

    let mut tables: BTreeSet<String> = pool.templates.iter().flat_map(|t| t.scanset.iter().cloned()).collect();
    if let Some(m) = mapping {
        tables.extend(m.forward.values().cloned());
    }
    let tables: Vec<&str> = tables
        .iter()
        .map(String::as_str)
        .filter(|t| catalog.table(t).is_some())
        .collect();

    let span = (summary.end_ms - summary.start_ms) as i128;
    let mut queries = Vec::with_capacity(total);
    let (mut r, mut w) = (0, 0);
    for i in 0..total {
        let arrival_ms = if total > 1 {
            summary.start_ms + (span * i as i128 / (total - 1) as i128) as i64
        } else {
            summary.start_ms
        };
        let slot = if tables.is_empty() {
            Slot::Read
        } else {
            pattern[i % pattern.len()]
        };
        let q = match slot {
            Slot::Read => {
                let (template_id, sql) = selects[r % selects.len()];
                let source = summary.select_ids.get(r % reads.max(1)).copied();
                r += 1;
                let mut flags = BTreeSet::new();
                if wrapped {
                    flags.insert(QueryFlag::PoolWrapped);
                }
                SynthesizedQuery {
                    seq: i,
                    arrival_ms,
                    query_type: QueryType::Select,
                    sql: sql.to_string(),
                    source_entry_id: source,
                    provenance: Provenance::Baseline,
                    flags,
                    read_tables: pool.templates[template_id].scanset.iter().cloned().collect(),
                    write_table: None,
                }
            }
            Slot::Write => {
                let table = tables[w % tables.len()];
                let source = summary.dml_ids.get(w % writes.max(1)).copied();
                w += 1;
                let dml = delete_reinsert(catalog.table(table).unwrap());
                SynthesizedQuery {
                    seq: i,
                    arrival_ms,
                    query_type: QueryType::Delete,
                    sql: dml.sql,
                    source_entry_id: source,
                    provenance: Provenance::Baseline,
                    flags: dml.flags.into_iter().collect(),
                    read_tables: vec![table.to_string()],
                    write_table: Some(table.to_string()),
                }
            }
        };
        queries.push(q);
    }
    Ok(Workload::new(metadata, queries))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::metadata;
    use super::*;
    use crate::catalog::test_support::parent_child_catalog;
    use crate::features::annotate_workload;

    #[test]
    fn two_to_one_pattern() {
        assert_eq!(ratio_pattern(200, 100), [Slot::Read, Slot::Read, Slot::Write]);
        assert_eq!(ratio_pattern(5, 0), [Slot::Read]);
        assert_eq!(ratio_pattern(1, 1), [Slot::Read, Slot::Write]);
        assert_eq!(ratio_pattern(7, 3).len(), 10);
    }

    fn pool() -> QueryPool {
        let cat = parent_child_catalog(50);
        let mut pool = QueryPool::from_sources(&[
            ("a.sql".into(), "SELECT COUNT(*) FROM parent WHERE score > 3".into()),
            (
                "b.sql".into(),
                "SELECT COUNT(*) FROM parent p, child c WHERE p.id = c.parent_id AND c.qty < 4".into(),
            ),
        ])
        .unwrap();
        pool.instantiate(&cat, 5, 3);
        pool
    }

    fn summary(reads: usize, writes: usize, unique: usize, span: (i64, i64)) -> BaselineSummary {
        BaselineSummary {
            unique_selects: unique,
            select_ids: (0..reads).collect(),
            dml_ids: (reads..reads + writes).collect(),
            start_ms: span.0,
            end_ms: span.1,
        }
    }

    #[test]
    fn uniform_timestamps() {
        let cat = parent_child_catalog(50);
        let w = round_robin_baseline(&summary(2, 2, 2, (0, 3000)), &pool(), &cat, None, metadata()).unwrap();
        let times: Vec<i64> = w.queries.iter().map(|q| q.arrival_ms).collect();
        assert_eq!(times, [0, 1000, 2000, 3000]);
        assert!(w.queries.iter().all(|q| q.provenance == Provenance::Baseline));
        w.validate().unwrap();
    }

    #[test]
    fn no_dml_aware_repetitions() {
        let cat = parent_child_catalog(50);
        let w = round_robin_baseline(&summary(200, 100, 6, (0, 10_000)), &pool(), &cat, None, metadata()).unwrap();
        let distinct: HashSet<&str> = w
            .queries
            .iter()
            .filter(|q| q.query_type == QueryType::Select)
            .map(|q| q.sql.as_str())
            .collect();
        assert_eq!(distinct.len(), 6);
        let report = annotate_workload(&w).unwrap();
        assert!(report.qrr > 0.9);
        assert_eq!(report.qrr_dml, 0.0);
    }

    #[test]
    fn wraps_small_pool() {
        let cat = parent_child_catalog(50);
        let w = round_robin_baseline(&summary(30, 0, 25, (0, 10)), &pool(), &cat, None, metadata()).unwrap();
        assert!(w.queries.iter().all(|q| q.flags.contains(&QueryFlag::PoolWrapped)));
    }

    #[test]
    fn empty_pool() {
        let cat = parent_child_catalog(5);
        let r = round_robin_baseline(&summary(1, 0, 1, (0, 0)), &QueryPool::default(), &cat, None, metadata());
        assert!(matches!(r, Err(WorkloadError::EmptyPool)));
    }
}
