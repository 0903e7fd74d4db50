//! DML-aware result-cache simulator.
//!
//! A select is a hit when its key is cached and no write touched any table of
//! its scanset since the entry was stored. Writes invalidate every entry whose
//! scanset contains the written table.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{QueryType, WorkloadTrace};
use crate::workload::Workload;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("query {seq} has no runtime (source entry {source_entry:?})")]
    MissingRuntime { seq: usize, source_entry: Option<usize> },
    #[error("no cache policies given")]
    NoPolicies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheKey {
    SqlText,
    QueryHash,
    /// Results shared by every query over the same table set.
    Scanset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitCost {
    Fixed(f64),
    /// A hit costs as much as a miss; neutral policy.
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachePolicy {
    pub name: String,
    pub key: CacheKey,
    pub hit_cost: HitCost,
    /// Entry limit with LRU eviction; unbounded when `None`.
    pub capacity: Option<usize>,
}

impl Default for CachePolicy {
    fn default() -> Self {
        CachePolicy {
            name: "text".into(),
            key: CacheKey::SqlText,
            hit_cost: HitCost::Fixed(1.0),
            capacity: None,
        }
    }
}

/// One statement as the simulator sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimQuery {
    pub seq: usize,
    pub is_select: bool,
    pub text: String,
    pub hash: String,
    /// Sorted.
    pub scanset: Vec<String>,
    pub write: Option<String>,
    pub runtime_ms: f64,
}

impl SimQuery {
    /// Statements of a trace; the hash doubles as the text key.
    pub fn from_trace(trace: &WorkloadTrace) -> Vec<SimQuery> {
        trace
            .entries()
            .iter()
            .map(|e| SimQuery {
                seq: e.entry_id,
                is_select: e.is_select(),
                text: e.query_hash.clone(),
                hash: e.query_hash.clone(),
                scanset: e.read_tables.iter().map(|t| t.to_string()).collect(),
                write: e.invalidates().map(|t| t.to_string()),
                runtime_ms: e.runtime_ms as f64,
            })
            .collect()
    }

    /// Statements of a workload with runtimes borrowed from the source
    /// trace entries.
    pub fn from_workload(workload: &Workload, trace: &WorkloadTrace) -> Result<Vec<SimQuery>, SimError> {
        workload
            .queries
            .iter()
            .map(|q| {
                let src = q
                    .source_entry_id
                    .and_then(|id| trace.get(id))
                    .ok_or(SimError::MissingRuntime {
                        seq: q.seq,
                        source_entry: q.source_entry_id,
                    })?;
                let mut scanset = q.read_tables.clone();
                scanset.sort();
                let is_select = q.query_type == QueryType::Select;
                Ok(SimQuery {
                    seq: q.seq,
                    is_select,
                    text: q.sql.clone(),
                    hash: src.query_hash.clone(),
                    scanset,
                    write: if is_select { None } else { q.write_table.clone() },
                    runtime_ms: src.runtime_ms as f64,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Hit,
    Miss,
    Write,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub seq: usize,
    pub outcome: Outcome,
    pub cost_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheReport {
    pub policy: String,
    pub total_runtime_nocache_ms: f64,
    pub total_runtime_cache_ms: f64,
    pub speedup: f64,
    pub select_runtime_nocache_ms: f64,
    pub select_runtime_cache_ms: f64,
    pub select_speedup: f64,
    pub select_count: usize,
    pub hit_count: usize,
    pub miss_count: usize,
    pub invalidation_count: usize,
    pub outcomes: Vec<QueryOutcome>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        1.0
    }
}

struct CacheEntry {
    scanset: Vec<String>,
    last_used: usize,
}

pub fn simulate(queries: &[SimQuery], policy: &CachePolicy) -> CacheReport {
    let mut cache: HashMap<String, CacheEntry> = HashMap::new();
    let mut outcomes = Vec::with_capacity(queries.len());
    let (mut total_nc, mut total_c, mut sel_nc, mut sel_c) = (0.0, 0.0, 0.0, 0.0);
    let (mut hits, mut misses, mut invalidations, mut selects) = (0, 0, 0, 0);

    for (tick, q) in queries.iter().enumerate() {
        total_nc += q.runtime_ms;
        if q.is_select {
            selects += 1;
            sel_nc += q.runtime_ms;
            let key = match policy.key {
                CacheKey::SqlText => q.text.clone(),
                CacheKey::QueryHash => q.hash.clone(),
                CacheKey::Scanset => q.scanset.join("|"),
            };
            let (outcome, cost) = match cache.get_mut(&key) {
                Some(entry) => {
                    entry.last_used = tick;
                    hits += 1;
                    let cost = match policy.hit_cost {
                        HitCost::Fixed(c) => c,
                        HitCost::Runtime => q.runtime_ms,
                    };
                    (Outcome::Hit, cost)
                }
                None => {
                    misses += 1;
                    if policy.capacity == Some(0) {
                        (Outcome::Miss, q.runtime_ms)
                    } else {
                        if policy.capacity.is_some_and(|c| cache.len() >= c) {
                            let victim = cache
                                .iter()
                                .min_by_key(|(_, e)| e.last_used)
                                .map(|(k, _)| k.clone())
                                .unwrap();
                            cache.remove(&victim);
                        }
                        cache.insert(
                            key,
                            CacheEntry {
                                scanset: q.scanset.clone(),
                                last_used: tick,
                            },
                        );
                        (Outcome::Miss, q.runtime_ms)
                    }
                }
            };
            sel_c += cost;
            total_c += cost;
            outcomes.push(QueryOutcome {
                seq: q.seq,
                outcome,
                cost_ms: cost,
            });
        } else {
            total_c += q.runtime_ms;
            let outcome = match &q.write {
                Some(table) => {
                    let before = cache.len();
                    cache.retain(|_, e| !e.scanset.contains(table));
                    invalidations += before - cache.len();
                    Outcome::Write
                }
                None => Outcome::Other,
            };
            outcomes.push(QueryOutcome {
                seq: q.seq,
                outcome,
                cost_ms: q.runtime_ms,
            });
        }
    }

    CacheReport {
        policy: policy.name.clone(),
        total_runtime_nocache_ms: total_nc,
        total_runtime_cache_ms: total_c,
        speedup: ratio(total_nc, total_c),
        select_runtime_nocache_ms: sel_nc,
        select_runtime_cache_ms: sel_c,
        select_speedup: ratio(sel_nc, sel_c),
        select_count: selects,
        hit_count: hits,
        miss_count: misses,
        invalidation_count: invalidations,
        outcomes,
    }
}

/// One simulation per policy, run in parallel; reports keep policy order.
pub fn sweep(queries: &[SimQuery], policies: &[CachePolicy]) -> Result<Vec<CacheReport>, SimError> {
    if policies.is_empty() {
        return Err(SimError::NoPolicies);
    }
    Ok(policies.par_iter().map(|p| simulate(queries, p)).collect())
}

pub fn write_sweep_csv<W: Write>(reports: &[CacheReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "total_ms_nocache",
        "total_ms_cache",
        "speedup",
        "hits",
        "invalidations",
        "select_speedup",
    ])?;
    for r in reports {
        w.write_record([
            r.policy.clone(),
            format!("{:.3}", r.total_runtime_nocache_ms),
            format!("{:.3}", r.total_runtime_cache_ms),
            format!("{:.4}", r.speedup),
            r.hit_count.to_string(),
            r.invalidation_count.to_string(),
            format!("{:.4}", r.select_speedup),
        ])?;
    }
    w.flush()?;
    Ok(())
}
