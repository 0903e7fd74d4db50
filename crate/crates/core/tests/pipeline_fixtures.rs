mod common;

use tracesynth::backend::ExecutionBackend;
use tracesynth::features::annotate_repetitions;
use tracesynth::pipeline::{staging_plan, synthesize, PipelineError, SynthConfig, SynthInputs};
use tracesynth::{Provenance, QueryType, SynthesisMode, WorkloadTrace};

use common::*;

fn config(mode: SynthesisMode) -> SynthConfig {
    SynthConfig {
        mode,
        seed: 11,
        ..SynthConfig::default()
    }
}

#[test]
fn every_mode_emits_a_valid_workload() {
    let trace = load_trace("mini_trace.csv");
    let support = load_support();
    let pool = load_pool();
    for mode in [
        SynthesisMode::Matching,
        SynthesisMode::Generation,
        SynthesisMode::Baseline,
    ] {
        let inputs = SynthInputs {
            trace: &trace,
            catalog: &support.catalog,
            pool: Some(&pool),
            backend: None,
        };
        let (w, report) = synthesize(&config(mode), inputs).unwrap();
        w.validate().unwrap();
        assert_eq!(w.metadata.mode, mode);
        assert_eq!(w.metadata.trace_fingerprint, trace.fingerprint());
        assert_eq!(report.emitted, w.len());
        let selects = w.queries.iter().filter(|q| q.query_type == QueryType::Select).count();
        if mode == SynthesisMode::Baseline {
            // fixed read/write pattern approximates the mix
            assert_eq!(w.len(), trace.len());
            assert!(selects.abs_diff(trace.selects().count()) <= trace.len() / 10);
        } else {
            assert_eq!(selects, trace.selects().count(), "{mode}");
        }
        for q in &w.queries {
            let ok = match mode {
                SynthesisMode::Matching => true,
                SynthesisMode::Generation => q.provenance == Provenance::Generated,
                SynthesisMode::Baseline => q.provenance == Provenance::Baseline,
            };
            assert!(ok, "{mode}: {:?}", q.provenance);
            assert!(q.read_tables.windows(2).all(|p| p[0] < p[1]));
        }
    }
}

#[test]
fn matched_selects_cite_pool_templates() {
    let trace = load_trace("mini_trace.csv");
    let support = load_support();
    let pool = load_pool();
    let inputs = SynthInputs {
        trace: &trace,
        catalog: &support.catalog,
        pool: Some(&pool),
        backend: None,
    };
    let (w, _) = synthesize(&config(SynthesisMode::Matching), inputs).unwrap();
    for q in w.queries.iter().filter(|q| q.query_type == QueryType::Select) {
        assert!(matches!(q.provenance, Provenance::Matched(id) if id < pool.len()));
    }
}

#[test]
fn validated_generation_runs_on_support_data() {
    let trace = load_trace("mini_trace.csv");
    let support = load_support();
    let cfg = config(SynthesisMode::Generation);
    let mut backend = support.backend();
    backend
        .apply_staging(&staging_plan(&support.catalog, &cfg), &support.catalog)
        .unwrap();
    let inputs = SynthInputs {
        trace: &trace,
        catalog: &support.catalog,
        pool: None,
        backend: Some(&mut backend),
    };
    let (w, report) = synthesize(&cfg, inputs).unwrap();
    let t = annotate_repetitions(&trace).unwrap();
    assert!(report.workload_repetition.qrr >= t.qrr);
    for q in w.queries.iter().filter(|q| q.query_type == QueryType::Select) {
        assert!(backend.execute(&q.sql).unwrap() > 0, "empty result: {}", q.sql);
    }
}

#[test]
fn empty_trace_is_rejected() {
    let support = load_support();
    let trace = WorkloadTrace::sort_and_index(vec![]);
    let inputs = SynthInputs {
        trace: &trace,
        catalog: &support.catalog,
        pool: None,
        backend: None,
    };
    let err = synthesize(&config(SynthesisMode::Generation), inputs).unwrap_err();
    assert!(matches!(err, PipelineError::EmptyTrace));
}

#[test]
fn baseline_needs_a_pool() {
    let support = load_support();
    let trace = load_trace("rrwrr.csv");
    let inputs = SynthInputs {
        trace: &trace,
        catalog: &support.catalog,
        pool: None,
        backend: None,
    };
    let err = synthesize(&config(SynthesisMode::Baseline), inputs).unwrap_err();
    assert!(matches!(err, PipelineError::MissingPool { .. }));
}
