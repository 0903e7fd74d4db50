//! End-to-end synthesis: trace + schema (+ pool) to a workload and a report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ExecutionBackend;
use crate::catalog::{
    build_staging_plan, map_tables, CatalogError, SchemaCatalog, StagingOptions, StagingPlan, TableMapping,
};
use crate::digest::sha256_hex;
use crate::features::{
    annotate_repetitions, annotate_workload, compare_workloads, estimate_table_scan_sizes, FeatureError,
    RepetitionDelta, RepetitionReport,
};
use crate::generation::{GenConfig, GenError, Generator};
use crate::matching::{
    inject_simple_dml, match_entry, DmlCounters, MatchError, MatchState, QueryPool, DEFAULT_INSTANTIATION_BUDGET,
};
use crate::trace::{QueryType, WorkloadTrace};
use crate::workload::{
    round_robin_baseline, BaselineSummary, Provenance, QueryFlag, SynthesisMode, SynthesizedQuery, Workload,
    WorkloadError, WorkloadMetadata,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("{mode} synthesis needs a query pool")]
    MissingPool { mode: SynthesisMode },
    #[error("entry {entry_id}: {source}")]
    Generation {
        entry_id: usize,
        #[source]
        source: GenError,
    },
    #[error("entry {entry_id}: {source}")]
    Matching {
        entry_id: usize,
        #[source]
        source: MatchError,
    },
    #[error(transparent)]
    Pool(MatchError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub mode: SynthesisMode,
    pub seed: u64,
    pub generation: GenConfig,
    pub staging: StagingOptions,
    pub instantiation_budget: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: SynthesisMode::Generation,
            seed: 0,
            generation: GenConfig::default(),
            staging: StagingOptions::default(),
            instantiation_budget: DEFAULT_INSTANTIATION_BUDGET,
        }
    }
}

impl SynthConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRates {
    pub qrr: f64,
    pub srr: f64,
    pub qrr_dml: f64,
    pub srr_dml: f64,
}

impl From<&RepetitionReport> for RepetitionRates {
    fn from(r: &RepetitionReport) -> Self {
        RepetitionRates {
            qrr: r.qrr,
            srr: r.srr,
            qrr_dml: r.qrr_dml,
            srr_dml: r.srr_dml,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub mode: SynthesisMode,
    pub seed: u64,
    pub trace_entries: usize,
    pub emitted: usize,
    pub skipped_other: usize,
    pub trace_repetition: RepetitionRates,
    pub workload_repetition: RepetitionRates,
    /// Workload minus trace.
    pub repetition_delta: RepetitionDelta,
    pub shortfall_count: usize,
    pub flag_counts: BTreeMap<QueryFlag, usize>,
    pub mapping: TableMapping,
    pub pool_skipped: Vec<(String, String)>,
}

/// Everything a synthesis run reads.
pub struct SynthInputs<'a> {
    pub trace: &'a WorkloadTrace,
    pub catalog: &'a SchemaCatalog,
    pub pool: Option<&'a QueryPool>,
    /// Database holding the base tables and, for generation, the staging
    /// twins. Generated selects are left unvalidated without one.
    pub backend: Option<&'a mut dyn ExecutionBackend>,
}

/// Staging plan used by generation for a given catalog and config.
pub fn staging_plan(catalog: &SchemaCatalog, config: &SynthConfig) -> StagingPlan {
    build_staging_plan(catalog, config.staging.clone())
}

fn prepared_pool(
    pool: Option<&QueryPool>,
    catalog: &SchemaCatalog,
    config: &SynthConfig,
) -> Result<QueryPool, PipelineError> {
    let mut pool = pool.cloned().ok_or(PipelineError::MissingPool { mode: config.mode })?;
    pool.check_against(catalog).map_err(PipelineError::Pool)?;
    pool.instantiate(catalog, config.instantiation_budget, config.seed);
    Ok(pool)
}

pub fn synthesize(config: &SynthConfig, inputs: SynthInputs<'_>) -> Result<(Workload, SynthesisReport), PipelineError> {
    let trace = inputs.trace;
    if trace.is_empty() {
        return Err(PipelineError::EmptyTrace);
    }
    let catalog = inputs.catalog;
    let stats = estimate_table_scan_sizes(trace);
    let mapping = map_tables(&stats, catalog)?;
    let metadata = WorkloadMetadata {
        mode: config.mode,
        seed: config.seed,
        trace_fingerprint: trace.fingerprint(),
        config_digest: config.digest(),
    };
    let mut skipped_other = 0;
    let mut pool_skipped = Vec::new();

    let workload = match config.mode {
        SynthesisMode::Baseline => {
            let pool = prepared_pool(inputs.pool, catalog, config)?;
            pool_skipped = pool.skipped.clone();
            skipped_other = trace
                .entries()
                .iter()
                .filter(|e| e.query_type == QueryType::Other)
                .count();
            round_robin_baseline(
                &BaselineSummary::from_trace(trace),
                &pool,
                catalog,
                Some(&mapping),
                metadata,
            )?
        }
        SynthesisMode::Matching => {
            let pool = prepared_pool(inputs.pool, catalog, config)?;
            pool_skipped = pool.skipped.clone();
            let joins: Vec<u32> = trace.selects().map(|e| e.num_joins).collect();
            let range = (
                joins.iter().min().copied().unwrap_or(0),
                joins.iter().max().copied().unwrap_or(0),
            );
            let mut state = MatchState::new(&pool, range, config.seed);
            let mut counters = DmlCounters::default();
            let mut queries = Vec::new();
            for e in trace.entries() {
                let q = if e.is_select() {
                    let m = match_entry(e, &mut state, &pool);
                    SynthesizedQuery {
                        seq: queries.len(),
                        arrival_ms: e.arrival_ms,
                        query_type: e.query_type,
                        sql: m.sql,
                        source_entry_id: Some(e.entry_id),
                        provenance: Provenance::Matched(m.template_id),
                        flags: m.flags,
                        read_tables: m.read_tables,
                        write_table: None,
                    }
                } else if e.query_type.is_dml() {
                    let (table, dml) = inject_simple_dml(e, &mapping, catalog, &mut counters).map_err(|source| {
                        PipelineError::Matching {
                            entry_id: e.entry_id,
                            source,
                        }
                    })?;
                    SynthesizedQuery {
                        seq: queries.len(),
                        arrival_ms: e.arrival_ms,
                        query_type: e.query_type,
                        sql: dml.sql,
                        source_entry_id: Some(e.entry_id),
                        provenance: Provenance::Generated,
                        flags: dml.flags.into_iter().collect(),
                        read_tables: vec![table.clone()],
                        write_table: Some(table),
                    }
                } else {
                    skipped_other += 1;
                    continue;
                };
                queries.push(q);
            }
            Workload::new(metadata, queries)
        }
        SynthesisMode::Generation => {
            let plan = staging_plan(catalog, config);
            let mut generator = Generator::new(
                catalog,
                &mapping,
                &stats,
                Some(&plan),
                config.generation.clone(),
                config.seed,
            );
            let mut backend = inputs.backend;
            let mut queries = Vec::new();
            for e in trace.entries() {
                let out =
                    generator
                        .generate(e, backend.as_deref_mut())
                        .map_err(|source| PipelineError::Generation {
                            entry_id: e.entry_id,
                            source,
                        })?;
                let Some(g) = out else { continue };
                queries.push(SynthesizedQuery {
                    seq: queries.len(),
                    arrival_ms: e.arrival_ms,
                    query_type: g.query_type,
                    sql: g.sql,
                    source_entry_id: Some(e.entry_id),
                    provenance: Provenance::Generated,
                    flags: g.flags,
                    read_tables: g.read_tables,
                    write_table: g.write_table,
                });
            }
            skipped_other = generator.skipped_other;
            Workload::new(metadata, queries)
        }
    };
    workload.validate()?;

    let trace_rep = annotate_repetitions(trace)?;
    let workload_rep = if workload.is_empty() {
        None
    } else {
        Some(annotate_workload(&workload)?)
    };
    let workload_rates = workload_rep.as_ref().map_or(
        RepetitionRates {
            qrr: 0.0,
            srr: 0.0,
            qrr_dml: 0.0,
            srr_dml: 0.0,
        },
        RepetitionRates::from,
    );
    let repetition_delta = match &workload_rep {
        Some(w) => compare_workloads(&trace_rep, w),
        None => RepetitionDelta {
            qrr: -trace_rep.qrr,
            srr: -trace_rep.srr,
            qrr_dml: -trace_rep.qrr_dml,
            srr_dml: -trace_rep.srr_dml,
        },
    };
    let flag_counts = workload.flag_counts();
    let report = SynthesisReport {
        mode: config.mode,
        seed: config.seed,
        trace_entries: trace.len(),
        emitted: workload.len(),
        skipped_other,
        trace_repetition: RepetitionRates::from(&trace_rep),
        workload_repetition: workload_rates,
        repetition_delta,
        shortfall_count: flag_counts.get(&QueryFlag::Shortfall).copied().unwrap_or(0),
        flag_counts,
        mapping,
        pool_skipped,
    };
    Ok((workload, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::SqliteBackend;
    use crate::catalog::test_support::{parent_child, parent_child_catalog};
    use crate::trace::test_support::entry;
    use crate::workload::emit_workload;

    fn trace() -> WorkloadTrace {
        let mut es = vec![
            entry(QueryType::Select, 0, &[0, 1], None, "a62e"),
            entry(QueryType::Insert, 10, &[0, 3], Some(1), "73b9"),
            entry(QueryType::Select, 20, &[0, 1], None, "a62e"),
            entry(QueryType::Select, 30, &[1], None, "962c"),
        ];
        es[0].num_joins = 1;
        es[1].num_joins = 1;
        es[2].num_joins = 1;
        WorkloadTrace::sort_and_index(es)
    }

    fn pool() -> QueryPool {
        QueryPool::from_sources(&[
            ("a.sql".into(), "SELECT COUNT(*) FROM parent WHERE score > 3".into()),
            (
                "b.sql".into(),
                "SELECT COUNT(*) FROM parent p, child c WHERE p.id = c.parent_id AND c.qty < 4".into(),
            ),
        ])
        .unwrap()
    }

    fn bytes(w: &Workload) -> Vec<u8> {
        let mut out = Vec::new();
        emit_workload(w, &mut out).unwrap();
        out
    }

    #[test]
    fn every_mode_is_deterministic() {
        let cat = parent_child_catalog(200);
        let (schema, data) = parent_child(200);
        let trace = trace();
        let pool = pool();
        for mode in [
            SynthesisMode::Matching,
            SynthesisMode::Generation,
            SynthesisMode::Baseline,
        ] {
            let config = SynthConfig {
                mode,
                seed: 11,
                ..SynthConfig::default()
            };
            let run = || {
                let mut b = SqliteBackend::load(&schema, &data).unwrap();
                b.apply_staging(&staging_plan(&cat, &config), &cat).unwrap();
                let inputs = SynthInputs {
                    trace: &trace,
                    catalog: &cat,
                    pool: Some(&pool),
                    backend: Some(&mut b),
                };
                synthesize(&config, inputs).unwrap()
            };
            let (a, report) = run();
            let (b, _) = run();
            assert_eq!(bytes(&a), bytes(&b), "{mode}");
            assert_eq!(report.emitted, a.len());
            assert_eq!(a.metadata.mode, mode);
        }
    }

    #[test]
    fn baseline_provenance() {
        let cat = parent_child_catalog(50);
        let config = SynthConfig {
            mode: SynthesisMode::Baseline,
            seed: 1,
            ..SynthConfig::default()
        };
        let pool = pool();
        let (w, _) = synthesize(
            &config,
            SynthInputs {
                trace: &trace(),
                catalog: &cat,
                pool: Some(&pool),
                backend: None,
            },
        )
        .unwrap();
        assert!(w.queries.iter().all(|q| q.provenance == Provenance::Baseline));
    }

    #[test]
    fn matching_needs_pool() {
        let cat = parent_child_catalog(50);
        let config = SynthConfig {
            mode: SynthesisMode::Matching,
            ..SynthConfig::default()
        };
        let r = synthesize(
            &config,
            SynthInputs {
                trace: &trace(),
                catalog: &cat,
                pool: None,
                backend: None,
            },
        );
        assert!(matches!(r, Err(PipelineError::MissingPool { .. })));
    }

    #[test]
    fn generation_keeps_four_rows_repetition() {
        let cat = parent_child_catalog(50);
        let config = SynthConfig {
            seed: 5,
            ..SynthConfig::default()
        };
        let (w, report) = synthesize(
            &config,
            SynthInputs {
                trace: &trace(),
                catalog: &cat,
                pool: None,
                backend: None,
            },
        )
        .unwrap();
        assert_eq!(w.queries[0].sql, w.queries[2].sql);
        assert!((report.trace_repetition.qrr - 1.0 / 3.0).abs() < 1e-12);
        assert!((report.workload_repetition.qrr - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.workload_repetition.qrr_dml, 0.0);
    }

    #[test]
    fn config_digest_tracks_content() {
        let a = SynthConfig::default();
        let b = SynthConfig {
            seed: 1,
            ..SynthConfig::default()
        };
        assert_eq!(a.digest(), SynthConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
