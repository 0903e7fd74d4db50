//! Matching-based synthesis: trace selects are mapped onto instantiations of
//! a pool of existing benchmark queries, writes onto minimal DML.

mod dml;
mod pool;

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{SchemaCatalog, TableMapping};
use crate::trace::{QueryType, Scanset, TraceEntry};
use crate::workload::QueryFlag;

pub use dml::{delete_reinsert, noop_update, single_row_insert, DmlCounters, MinimalDml};
pub use pool::{load_query_pool, LiteralSlot, QueryPool, QueryTemplate, SlotKind};

pub const DEFAULT_INSTANTIATION_BUDGET: usize = 10;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("cannot use pool query {name}: {reason}")]
    UnparsableQuery { name: String, reason: String },
    #[error("query pool is empty")]
    EmptyPool,
    #[error("trace table {0} has no schema image")]
    UnmappedTable(u32),
    #[error("entry {0} has no write table")]
    MissingWriteTable(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Linear map of a trace join count onto the pool's join-count range.
pub fn normalize_join_count(j: u32, trace_range: (u32, u32), pool_range: (u32, u32)) -> u32 {
    let (jt_min, jt_max) = trace_range;
    let (jp_min, jp_max) = (pool_range.0 as f64, pool_range.1 as f64);
    if jt_max <= jt_min {
        return ((jp_min + jp_max) / 2.0).round() as u32;
    }
    let j = j.clamp(jt_min, jt_max) as f64;
    let t = (j - jt_min as f64) / (jt_max - jt_min) as f64;
    (jp_min + t * (jp_max - jp_min)).round() as u32
}

/// Output of one matching step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedQuery {
    pub sql: String,
    pub template_id: usize,
    pub read_tables: Vec<String>,
    pub flags: BTreeSet<QueryFlag>,
}

type RepetitionKey = (QueryType, String, Scanset);

pub struct MatchState {
    hash_registry: HashMap<RepetitionKey, MatchedQuery>,
    scanset_registry: HashMap<Scanset, usize>,
    /// Next unused instantiation per template.
    cursors: Vec<usize>,
    /// Instantiation indices emitted so far, per template.
    emitted: Vec<Vec<usize>>,
    trace_join_range: (u32, u32),
    rng: ChaCha8Rng,
}

impl MatchState {
    pub fn new(pool: &QueryPool, trace_join_range: (u32, u32), seed: u64) -> Self {
        MatchState {
            hash_registry: HashMap::new(),
            scanset_registry: HashMap::new(),
            cursors: vec![0; pool.templates.len()],
            emitted: vec![Vec::new(); pool.templates.len()],
            trace_join_range,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn take_instance(&mut self, template: &QueryTemplate, flags: &mut BTreeSet<QueryFlag>) -> String {
        let id = template.template_id;
        let idx = if self.cursors[id] < template.instantiations.len() {
            self.cursors[id] += 1;
            self.emitted[id].push(self.cursors[id] - 1);
            self.cursors[id] - 1
        } else {
            flags.insert(QueryFlag::ReusedInstance);
            let used = &self.emitted[id];
            used[self.rng.random_range(0..used.len())]
        };
        template.instantiations[idx].clone()
    }

    fn has_unused(&self, template: &QueryTemplate) -> bool {
        self.cursors[template.template_id] < template.instantiations.len()
    }
}

/// Maps one select: repeated hash re-emits the stored text, a known scanset
/// reuses its template, anything else picks the template closest in join
/// count.
pub fn match_entry(entry: &TraceEntry, state: &mut MatchState, pool: &QueryPool) -> MatchedQuery {
    let key = (entry.query_type, entry.query_hash.clone(), entry.read_tables.clone());
    if let Some(hit) = state.hash_registry.get(&key) {
        return hit.clone();
    }
    let mut flags = BTreeSet::new();
    let template = match state.scanset_registry.get(&entry.read_tables) {
        Some(&id) => &pool.templates[id],
        None => {
            let target = normalize_join_count(entry.num_joins, state.trace_join_range, pool.join_range()) as i64;
            let best = pool
                .templates
                .iter()
                .map(|t| (t.join_count as i64 - target).abs())
                .min()
                .expect("pool is non-empty");
            // equidistant join counts: the one holding the smallest id wins
            let group_jc = pool
                .templates
                .iter()
                .find(|t| (t.join_count as i64 - target).abs() == best)
                .unwrap()
                .join_count;
            let group: Vec<&QueryTemplate> = pool.templates.iter().filter(|t| t.join_count == group_jc).collect();
            let fresh: Vec<&QueryTemplate> = group.iter().copied().filter(|t| state.has_unused(t)).collect();
            let chosen = if fresh.is_empty() {
                group[0]
            } else {
                fresh[state.rng.random_range(0..fresh.len())]
            };
            state
                .scanset_registry
                .insert(entry.read_tables.clone(), chosen.template_id);
            chosen
        }
    };
    let sql = state.take_instance(template, &mut flags);
    let out = MatchedQuery {
        sql,
        template_id: template.template_id,
        read_tables: template.scanset.iter().cloned().collect(),
        flags,
    };
    state.hash_registry.insert(key, out.clone());
    out
}

/// Minimal invalidating statement against the image of the written table.
pub fn inject_simple_dml(
    entry: &TraceEntry,
    mapping: &TableMapping,
    catalog: &SchemaCatalog,
    counters: &mut DmlCounters,
) -> Result<(String, MinimalDml), MatchError> {
    let w = entry.write_table.ok_or(MatchError::MissingWriteTable(entry.entry_id))?;
    let name = mapping.get(w).ok_or(MatchError::UnmappedTable(w.0))?;
    let table = catalog.table(name).ok_or(MatchError::UnmappedTable(w.0))?;
    let dml = match entry.query_type {
        QueryType::Insert => single_row_insert(table, counters),
        QueryType::Update => noop_update(table),
        _ => delete_reinsert(table),
    };
    Ok((name.to_string(), dml))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::map_tables;
    use crate::catalog::test_support::parent_child_catalog;
    use crate::features::estimate_table_scan_sizes;
    use crate::trace::test_support::entry;
    use crate::trace::WorkloadTrace;

    #[test]
    fn join_normalization() {
        assert_eq!(normalize_join_count(0, (0, 12), (0, 6)), 0);
        assert_eq!(normalize_join_count(12, (0, 12), (0, 6)), 6);
        assert_eq!(normalize_join_count(6, (0, 12), (0, 6)), 3);
        assert_eq!(normalize_join_count(4, (4, 4), (0, 6)), 3);
        assert_eq!(normalize_join_count(2, (1, 3), (2, 10)), 6);
    }

    fn pool() -> QueryPool {
        let cat = parent_child_catalog(100);
        let mut pool = QueryPool::from_sources(&[
            ("a.sql".into(), "SELECT COUNT(*) FROM parent WHERE score > 3".into()),
            (
                "b.sql".into(),
                "SELECT COUNT(*) FROM parent p, child c WHERE p.id = c.parent_id AND c.qty < 4".into(),
            ),
        ])
        .unwrap();
        pool.instantiate(&cat, 3, 1);
        pool
    }

    #[test]
    fn same_hash_same_text() {
        let pool = pool();
        let mut st = MatchState::new(&pool, (0, 1), 9);
        let a = match_entry(&entry(QueryType::Select, 0, &[0, 1], None, "a62e"), &mut st, &pool);
        let b = match_entry(&entry(QueryType::Select, 1, &[1], None, "962c"), &mut st, &pool);
        let c = match_entry(&entry(QueryType::Select, 2, &[0, 1], None, "a62e"), &mut st, &pool);
        assert_eq!(a, c);
        assert_ne!(a.sql, b.sql);
    }

    #[test]
    fn same_scanset_same_template_new_instance() {
        let pool = pool();
        let mut st = MatchState::new(&pool, (0, 1), 9);
        let a = match_entry(&entry(QueryType::Select, 0, &[0, 1], None, "h1"), &mut st, &pool);
        let b = match_entry(&entry(QueryType::Select, 1, &[0, 1], None, "h2"), &mut st, &pool);
        assert_eq!(a.template_id, b.template_id);
        assert_ne!(a.sql, b.sql);
    }

    #[test]
    fn max_joins_pick_max_template() {
        let pool = pool();
        let mut st = MatchState::new(&pool, (0, 4), 9);
        let mut e = entry(QueryType::Select, 0, &[0, 1, 2, 3, 4], None, "h");
        e.num_joins = 4;
        let m = match_entry(&e, &mut st, &pool);
        assert_eq!(pool.templates[m.template_id].join_count, 1);
    }

    #[test]
    fn exhausted_budget_reuses_instances() {
        let pool = pool();
        let mut st = MatchState::new(&pool, (0, 1), 9);
        let budget = pool.templates[1].instantiations.len();
        let mut seen = BTreeSet::new();
        for i in 0..budget + 3 {
            let m = match_entry(
                &entry(QueryType::Select, i as i64, &[0, 1], None, &format!("h{i}")),
                &mut st,
                &pool,
            );
            if i >= budget {
                assert!(m.flags.contains(&QueryFlag::ReusedInstance));
                assert!(seen.contains(&m.sql));
            }
            seen.insert(m.sql);
        }
        assert_eq!(seen.len(), budget);
    }

    #[test]
    fn four_rows_insert_targets_image() {
        let cat = parent_child_catalog(100);
        let trace = WorkloadTrace::sort_and_index(vec![
            entry(QueryType::Select, 0, &[1], None, "x"),
            entry(QueryType::Insert, 1, &[0], Some(1), "y"),
        ]);
        let mapping = map_tables(&estimate_table_scan_sizes(&trace), &cat).unwrap();
        let (table, dml) = inject_simple_dml(&trace.entries()[1], &mapping, &cat, &mut DmlCounters::default()).unwrap();
        assert_eq!(table, mapping.get(crate::TableId(1)).unwrap());
        assert!(dml.sql.starts_with(&format!("INSERT INTO {table}")));
    }
}
