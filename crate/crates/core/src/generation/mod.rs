//! Generation-based synthesis: every trace entry becomes a fresh statement
//! over the schema whose join path, byte footprint and repetition structure
//! follow the entry.

mod dml;
mod path;
mod predicates;

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ExecutionBackend};
use crate::catalog::{SchemaCatalog, StagingPlan, TableMapping};
use crate::digest::mix_seed;
use crate::features::TraceTableStats;
use crate::matching::{single_row_insert, DmlCounters};
use crate::sql::ident;
use crate::trace::{QueryType, Scanset, TraceEntry};
use crate::workload::QueryFlag;

pub use dml::row_cap;
pub use path::{plan_join_path, JoinPath, JoinPredicate, PathTable};
pub use predicates::{
    allocate_bytes, choose_predicate, AliasBudget, ByteAllocation, ByteTargeting, Predicate, PredicateChoice,
    PredicateKind,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("entry {0} reads tables without a schema image")]
    UnmappedScanset(usize),
    #[error("trace table {0} has no schema image")]
    UnmappedTable(u32),
    #[error("entry {0} has no write table")]
    MissingWriteTable(usize),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub byte_targeting: ByteTargeting,
    /// Accepted relative error between estimated and requested selectivity.
    pub tolerance: f64,
    /// Row cap of synthesized DML as a fraction of the table.
    pub dml_row_fraction: f64,
    pub max_repair_rounds: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            byte_targeting: ByteTargeting::default(),
            tolerance: 0.10,
            dml_row_fraction: 0.001,
            max_repair_rounds: 3,
        }
    }
}

/// One synthesized statement, before it is placed in a workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub sql: String,
    pub query_type: QueryType,
    pub read_tables: Vec<String>,
    pub write_table: Option<String>,
    pub flags: BTreeSet<QueryFlag>,
}

/// `SELECT <aggregates> FROM <path> [WHERE ...]`.
pub fn render_select(path: &JoinPath, predicates: &[Predicate], aggregates: &[String]) -> String {
    let mut sql = format!(
        "SELECT {} FROM {}",
        aggregates.join(", "),
        path.render_from(&|t| t.to_string())
    );
    push_where(&mut sql, predicates);
    sql
}

fn push_where(sql: &mut String, predicates: &[Predicate]) {
    if !predicates.is_empty() {
        let conds: Vec<String> = predicates.iter().map(Predicate::render).collect();
        sql.push_str(" WHERE ");
        sql.push_str(&conds.join(" AND "));
    }
}

/// Drops the most selective predicate until the probe finds a row. After
/// `max_rounds` failures every predicate is dropped.
pub fn validate_nonempty(
    backend: &mut dyn ExecutionBackend,
    path: &JoinPath,
    predicates: Vec<Predicate>,
    max_rounds: usize,
) -> Result<(Vec<Predicate>, BTreeSet<QueryFlag>), GenError> {
    let from = path.render_from(&|t| t.to_string());
    repair_until_nonempty(backend, &from, predicates, max_rounds)
}

fn repair_until_nonempty(
    backend: &mut dyn ExecutionBackend,
    from: &str,
    mut predicates: Vec<Predicate>,
    max_rounds: usize,
) -> Result<(Vec<Predicate>, BTreeSet<QueryFlag>), GenError> {
    let mut flags = BTreeSet::new();
    let mut round = 0;
    loop {
        let mut probe = format!("SELECT 1 FROM {from}");
        push_where(&mut probe, &predicates);
        probe.push_str(" LIMIT 1");
        if predicates.is_empty() || backend.execute(&probe)? > 0 {
            return Ok((predicates, flags));
        }
        if round == max_rounds {
            flags.insert(QueryFlag::FullScanFallback);
            return Ok((vec![], flags));
        }
        let tightest = (0..predicates.len())
            .min_by(|&a, &b| predicates[a].target.total_cmp(&predicates[b].target))
            .unwrap();
        predicates.remove(tightest);
        flags.insert(QueryFlag::Repaired);
        round += 1;
    }
}

type RepetitionKey = (QueryType, String, Scanset);

/// Synthesizes trace entries one at a time. Entries sharing query type,
/// hash and scanset receive identical text, and entries sharing a scanset
/// share a join path.
pub struct Generator<'a> {
    catalog: &'a SchemaCatalog,
    mapping: &'a TableMapping,
    stats: &'a TraceTableStats,
    staging: Option<&'a StagingPlan>,
    config: GenConfig,
    seed: u64,
    registry: HashMap<RepetitionKey, Generated>,
    paths: HashMap<Scanset, JoinPath>,
    /// Synthesized rows not yet deleted, per table.
    pending_inserts: HashMap<String, i64>,
    counters: DmlCounters,
    pub skipped_other: usize,
}

impl<'a> Generator<'a> {
    pub fn new(
        catalog: &'a SchemaCatalog,
        mapping: &'a TableMapping,
        stats: &'a TraceTableStats,
        staging: Option<&'a StagingPlan>,
        config: GenConfig,
        seed: u64,
    ) -> Self {
        Generator {
            catalog,
            mapping,
            stats,
            staging,
            config,
            seed,
            registry: HashMap::new(),
            paths: HashMap::new(),
            pending_inserts: HashMap::new(),
            counters: DmlCounters::default(),
            skipped_other: 0,
        }
    }

    fn rng(&self, entry: &TraceEntry, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_seed(self.seed, entry.entry_id as u64, stream))
    }

    fn path_for(&mut self, entry: &TraceEntry) -> Result<JoinPath, GenError> {
        if let Some(p) = self.paths.get(&entry.read_tables) {
            return Ok(p.clone());
        }
        let mut rng = self.rng(entry, 1);
        let p = plan_join_path(entry, self.mapping, self.catalog, &mut rng)?;
        self.paths.insert(entry.read_tables.clone(), p.clone());
        Ok(p)
    }

    fn predicates(
        &self,
        entry: &TraceEntry,
        path: &JoinPath,
        rng: &mut impl Rng,
    ) -> (Vec<Predicate>, BTreeSet<QueryFlag>) {
        let alloc = allocate_bytes(entry, path, self.catalog, self.stats, self.config.byte_targeting);
        let mut flags = BTreeSet::new();
        if alloc.shortfall {
            flags.insert(QueryFlag::Shortfall);
        }
        let mut preds = Vec::new();
        for b in &alloc.budgets {
            let Some(table) = self.catalog.table(&b.table) else {
                continue;
            };
            match choose_predicate(table, &b.alias, b.selectivity, self.config.tolerance, rng) {
                PredicateChoice::Filter(p) => preds.push(p),
                PredicateChoice::NoEligibleColumn => {
                    flags.insert(QueryFlag::NoEligibleColumn);
                }
                PredicateChoice::Unfiltered => {}
            }
        }
        (preds, flags)
    }

    fn aggregates(&self, entry: &TraceEntry, path: &JoinPath, rng: &mut impl Rng) -> Vec<String> {
        let mut out = vec!["COUNT(*)".to_string()];
        let numeric: Vec<(String, &str)> = path
            .tables
            .iter()
            .filter_map(|t| self.catalog.table(&t.table).map(|s| (t, s)))
            .flat_map(|(t, s)| {
                s.columns
                    .iter()
                    .filter(|c| c.kind.is_numeric() && !s.is_key_column(&c.name))
                    .map(move |c| (t.alias.clone(), c.name.as_str()))
            })
            .collect();
        let wanted = entry.num_aggregates.unwrap_or(1).max(1) as usize;
        if numeric.is_empty() {
            return out;
        }
        while out.len() < wanted {
            let (alias, col) = &numeric[rng.random_range(0..numeric.len())];
            let func = ["SUM", "MIN", "MAX"][rng.random_range(0..3)];
            let agg = format!("{func}({alias}.{})", ident(col));
            if !out.contains(&agg) {
                out.push(agg);
            } else if out.len() > numeric.len() * 3 {
                break;
            }
        }
        out
    }

    /// Statement for `entry`, or `None` for entries of type `other`.
    pub fn generate(
        &mut self,
        entry: &TraceEntry,
        backend: Option<&mut (dyn ExecutionBackend + '_)>,
    ) -> Result<Option<Generated>, GenError> {
        if entry.query_type == QueryType::Other {
            self.skipped_other += 1;
            return Ok(None);
        }
        let key = (entry.query_type, entry.query_hash.clone(), entry.read_tables.clone());
        if let Some(hit) = self.registry.get(&key) {
            let hit = hit.clone();
            self.note_effects(&hit);
            return Ok(Some(hit));
        }
        let out = match entry.query_type {
            QueryType::Select => self.select(entry, backend)?,
            QueryType::Insert => self.insert(entry, backend)?,
            QueryType::Update | QueryType::Delete => self.update_or_delete(entry)?,
            QueryType::Other => unreachable!(),
        };
        self.note_effects(&out);
        self.registry.insert(key, out.clone());
        Ok(Some(out))
    }

    fn note_effects(&mut self, g: &Generated) {
        let Some(w) = &g.write_table else { return };
        let Some(table) = self.catalog.table(w) else { return };
        let cap = row_cap(table, self.config.dml_row_fraction);
        let pending = self.pending_inserts.entry(w.clone()).or_insert(0);
        match g.query_type {
            QueryType::Insert if g.sql.contains(" SELECT ") => *pending += cap,
            QueryType::Delete if g.sql.contains(" IN (SELECT ") => *pending = (*pending - cap).max(0),
            _ => {}
        }
    }

    fn select(
        &mut self,
        entry: &TraceEntry,
        backend: Option<&mut (dyn ExecutionBackend + '_)>,
    ) -> Result<Generated, GenError> {
        let path = self.path_for(entry)?;
        let mut rng = self.rng(entry, 2);
        let (preds, mut flags) = self.predicates(entry, &path, &mut rng);
        flags.extend(path.flags.iter().copied());
        let preds = match backend {
            Some(b) => {
                let (kept, f) = validate_nonempty(b, &path, preds, self.config.max_repair_rounds)?;
                flags.extend(f);
                kept
            }
            None => {
                flags.insert(QueryFlag::Unvalidated);
                preds
            }
        };
        let aggregates = self.aggregates(entry, &path, &mut rng);
        Ok(Generated {
            sql: render_select(&path, &preds, &aggregates),
            query_type: QueryType::Select,
            read_tables: path.distinct_tables(),
            write_table: None,
            flags,
        })
    }

    fn write_target(&self, entry: &TraceEntry) -> Result<&'a crate::catalog::SchemaTable, GenError> {
        let w = entry.write_table.ok_or(GenError::MissingWriteTable(entry.entry_id))?;
        let name = self.mapping.get(w).ok_or(GenError::UnmappedTable(w.0))?;
        self.catalog.table(name).ok_or(GenError::UnmappedTable(w.0))
    }

    fn insert(
        &mut self,
        entry: &TraceEntry,
        backend: Option<&mut (dyn ExecutionBackend + '_)>,
    ) -> Result<Generated, GenError> {
        let target = self.write_target(entry)?;
        let w = target.name.clone();
        let staged = self.staging.and_then(|p| p.staged(&w));
        let Some(staged) = staged else {
            let dml = single_row_insert(target, &mut self.counters);
            let mut flags: BTreeSet<QueryFlag> = dml.flags.into_iter().collect();
            flags.insert(QueryFlag::NoStagingTwin);
            flags.insert(QueryFlag::FallbackMinimalDml);
            return Ok(Generated {
                sql: dml.sql,
                query_type: QueryType::Insert,
                read_tables: vec![w.clone()],
                write_table: Some(w),
                flags,
            });
        };
        let plan = self.staging.unwrap();
        let rename = |t: &str| plan.staged(t).map_or_else(|| t.to_string(), |s| s.staging.clone());
        let mut flags = BTreeSet::new();
        let mut read_tables: BTreeSet<String> = BTreeSet::from([staged.staging.clone()]);
        let gate = if entry.read_tables.is_empty() {
            None
        } else {
            let mut path = self.path_for(entry)?;
            let mut rng = self.rng(entry, 2);
            let (preds, f) = self.predicates(entry, &path, &mut rng);
            flags.extend(f);
            flags.extend(path.flags.iter().copied());
            // suffixed twin values no longer compare like the base values
            let preds: Vec<Predicate> = preds
                .into_iter()
                .filter(|p| {
                    let table = path
                        .tables
                        .iter()
                        .find(|t| t.alias == p.alias)
                        .map(|t| t.table.as_str());
                    !table
                        .and_then(|t| plan.staged(t))
                        .is_some_and(|s| s.suffixed_columns.contains(&p.column))
                })
                .collect();
            let preds = match backend {
                Some(b) => {
                    let from = path.render_from(&rename);
                    let (kept, f) = repair_until_nonempty(b, &from, preds, self.config.max_repair_rounds)?;
                    flags.extend(f);
                    kept
                }
                None => {
                    flags.insert(QueryFlag::Unvalidated);
                    preds
                }
            };
            read_tables.extend(path.tables.iter().map(|t| rename(&t.table)));
            let anchor = match path.alias_of(&w) {
                Some(a) => Some(a.to_string()),
                None => path.attach(&w, self.catalog),
            };
            let mut sub = match &anchor {
                Some(a) => format!(
                    "SELECT {a}.{} FROM {}",
                    ident(&staged.key_column),
                    path.render_from(&rename)
                ),
                None => format!("SELECT 1 FROM {}", path.render_from(&rename)),
            };
            push_where(&mut sub, &preds);
            match anchor {
                Some(_) => Some(dml::Gate::Keys(sub)),
                None => {
                    flags.insert(QueryFlag::DetachedRead);
                    Some(dml::Gate::Exists(sub))
                }
            }
        };
        let limit = row_cap(target, self.config.dml_row_fraction);
        Ok(Generated {
            sql: dml::staged_insert(target, staged, gate, limit),
            query_type: QueryType::Insert,
            read_tables: read_tables.into_iter().collect(),
            write_table: Some(w),
            flags,
        })
    }

    fn update_or_delete(&mut self, entry: &TraceEntry) -> Result<Generated, GenError> {
        let target = self.write_target(entry)?;
        let mut rng = self.rng(entry, 3);
        let fraction = self.config.dml_row_fraction;
        let text = if entry.query_type == QueryType::Update {
            dml::range_update(target, fraction, &mut rng)
        } else {
            let pending = self.pending_inserts.get(&target.name).copied().unwrap_or(0);
            let pending = if self.staging.and_then(|p| p.staged(&target.name)).is_some() {
                pending
            } else {
                0
            };
            dml::range_delete(target, fraction, pending, &mut rng)
        };
        Ok(Generated {
            sql: text.sql,
            query_type: entry.query_type,
            read_tables: vec![target.name.clone()],
            write_table: Some(target.name.clone()),
            flags: text.flags,
        })
    }
}
