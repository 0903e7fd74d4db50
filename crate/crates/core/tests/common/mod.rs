#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::Rng;
use tracesynth::backend::SqliteBackend;
use tracesynth::catalog::{analyze_schema, AnalyzeOptions, CsvDirectory, SchemaCatalog, SchemaDef};
use tracesynth::matching::{load_query_pool, QueryPool};
use tracesynth::trace::{parse_trace_file, ParseOptions};
use tracesynth::workload::WorkloadMetadata;
use tracesynth::{Provenance, QueryType, SynthesisMode, SynthesizedQuery, TableId, TraceEntry, WorkloadTrace};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_trace(name: &str) -> WorkloadTrace {
    parse_trace_file(&fixtures().join(name), &ParseOptions::default())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .trace
}

pub struct Support {
    pub schema: SchemaDef,
    pub data: CsvDirectory,
    pub catalog: SchemaCatalog,
}

pub fn load_support() -> Support {
    let data = CsvDirectory::new(fixtures().join("imdb_mini"));
    let schema = data.load_schema().unwrap();
    let catalog = analyze_schema(&schema, &data, AnalyzeOptions::default()).unwrap();
    Support { schema, data, catalog }
}

impl Support {
    pub fn backend(&self) -> SqliteBackend {
        SqliteBackend::load(&self.schema, &self.data).unwrap()
    }
}

pub fn load_pool() -> QueryPool {
    load_query_pool(&fixtures().join("pool")).unwrap()
}

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

/// Short trace over few tables and hashes so collisions are common.
pub fn random_trace(rng: &mut impl Rng, max_len: usize) -> WorkloadTrace {
    let n = rng.random_range(1..=max_len);
    let entries = (0..n)
        .map(|i| {
            let reads: BTreeSet<u32> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(0..3)).collect();
            let reads: Vec<u32> = reads.into_iter().collect();
            let hash = format!("h{}", rng.random_range(0..3));
            let t = i as i64 * 10;
            match rng.random_range(0..10) {
                0..=5 => entry(QueryType::Select, t, &reads, None, &hash),
                6 => entry(QueryType::Insert, t, &reads, Some(rng.random_range(0..3)), &hash),
                7 => entry(QueryType::Update, t, &reads, Some(rng.random_range(0..3)), &hash),
                8 => entry(QueryType::Delete, t, &reads, Some(rng.random_range(0..3)), &hash),
                _ => {
                    let write = rng.random_bool(0.5).then(|| rng.random_range(0..3));
                    entry(QueryType::Other, t, &[], write, &hash)
                }
            }
        })
        .collect();
    WorkloadTrace::sort_and_index(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleCounts {
    pub selects: usize,
    pub full: usize,
    pub scan: usize,
    pub full_dml: usize,
    pub scan_dml: usize,
}

/// Brute-force prior scan: for every select, look at every earlier select
/// and every entry in between.
pub fn repetition_oracle(trace: &WorkloadTrace) -> OracleCounts {
    let e = trace.entries();
    let mut c = OracleCounts::default();
    for i in 0..e.len() {
        if e[i].query_type != QueryType::Select {
            continue;
        }
        c.selects += 1;
        let clean = |j: usize| {
            (j + 1..i).all(|k| {
                let w = match e[k].query_type {
                    QueryType::Select => None,
                    _ => e[k].write_table,
                };
                w.is_none_or(|w| !e[i].read_tables.contains(&w))
            })
        };
        let same_scan = |j: usize| e[j].query_type == QueryType::Select && e[j].read_tables == e[i].read_tables;
        let same_full = |j: usize| same_scan(j) && e[j].query_hash == e[i].query_hash;
        c.full += (0..i).any(same_full) as usize;
        c.scan += (0..i).any(same_scan) as usize;
        c.full_dml += (0..i).any(|j| same_full(j) && clean(j)) as usize;
        c.scan_dml += (0..i).any(|j| same_scan(j) && clean(j)) as usize;
    }
    c
}

pub fn metadata() -> WorkloadMetadata {
    WorkloadMetadata {
        mode: SynthesisMode::Generation,
        seed: 1,
        trace_fingerprint: "t".into(),
        config_digest: "c".into(),
    }
}

/// Workload over a handful of statements whose text determines the tables
/// they touch; arrivals are increasing with random gaps.
pub fn random_statements(rng: &mut impl Rng, max_len: usize) -> Vec<SynthesizedQuery> {
    const TABLES: [&str; 3] = ["a", "b", "c"];
    let n = rng.random_range(1..=max_len);
    let mut t: i64 = rng.random_range(0..1_000);
    (0..n)
        .map(|seq| {
            t += [0, 1, 50, 5_000, 900_000][rng.random_range(0..5)] + rng.random_range(0..10);
            let (query_type, sql, reads, write) = if rng.random_bool(0.7) {
                let x = TABLES[rng.random_range(0..3)];
                let y = TABLES[rng.random_range(0..3)];
                let v = rng.random_range(0..3);
                let mut reads = vec![x.to_string(), y.to_string()];
                reads.sort();
                reads.dedup();
                let sql = if x == y {
                    format!("SELECT COUNT(*) FROM {x} WHERE v = {v}")
                } else {
                    format!("SELECT COUNT(*) FROM {x} JOIN {y} ON {x}.id = {y}.id WHERE {x}.v = {v}")
                };
                (QueryType::Select, sql, reads, None)
            } else {
                let w = TABLES[rng.random_range(0..3)];
                (
                    QueryType::Delete,
                    format!("DELETE FROM {w} WHERE id = {seq}"),
                    vec![w.to_string()],
                    Some(w.to_string()),
                )
            };
            SynthesizedQuery {
                seq,
                arrival_ms: t,
                query_type,
                sql,
                source_entry_id: Some(seq),
                provenance: Provenance::Generated,
                flags: BTreeSet::new(),
                read_tables: reads,
                write_table: write,
            }
        })
        .collect()
}
