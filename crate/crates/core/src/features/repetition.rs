use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::trace::{QueryType, WorkloadTrace};
use crate::workload::Workload;

/// One statement as seen by the repetition pass.
///
/// Traces and synthesized workloads both reduce to this shape: for a trace
/// the fingerprint is the query hash and tables are trace ids; for a
/// workload the fingerprint is the SQL text and tables are schema names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessEvent {
    pub id: usize,
    pub is_select: bool,
    pub fingerprint: String,
    /// Sorted and deduplicated.
    pub scanset: Vec<String>,
    /// Table whose cached results this statement invalidates.
    pub write: Option<String>,
}

impl AccessEvent {
    pub fn new(
        id: usize,
        is_select: bool,
        fingerprint: impl Into<String>,
        scanset: impl IntoIterator<Item = String>,
        write: Option<String>,
    ) -> Self {
        let mut scanset: Vec<String> = scanset.into_iter().collect();
        scanset.sort();
        scanset.dedup();
        AccessEvent {
            id,
            is_select,
            fingerprint: fingerprint.into(),
            scanset,
            write,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionAnnotation {
    pub entry_id: usize,
    pub is_full_repetition: bool,
    pub is_scanset_repetition: bool,
    pub is_full_repetition_dml_aware: bool,
    pub is_scanset_repetition_dml_aware: bool,
    /// Most recent prior select with the same fingerprint and scanset, or,
    /// for pure scanset repetitions, the most recent prior select with the
    /// same scanset.
    pub prior_entry_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub qrr: f64,
    pub srr: f64,
    pub qrr_dml: f64,
    pub srr_dml: f64,
    pub select_count: usize,
    pub full_repetitions: usize,
    pub scanset_repetitions: usize,
    pub full_repetitions_dml: usize,
    pub scanset_repetitions_dml: usize,
    pub annotations: Vec<RepetitionAnnotation>,
}

impl RepetitionReport {
    fn from_annotations(annotations: Vec<RepetitionAnnotation>) -> Result<Self, FeatureError> {
        let select_count = annotations.len();
        if select_count == 0 {
            return Err(FeatureError::EmptyTrace);
        }
        let count = |f: fn(&RepetitionAnnotation) -> bool| annotations.iter().filter(|a| f(a)).count();
        let full = count(|a| a.is_full_repetition);
        let scan = count(|a| a.is_scanset_repetition);
        let full_dml = count(|a| a.is_full_repetition_dml_aware);
        let scan_dml = count(|a| a.is_scanset_repetition_dml_aware);
        let n = select_count as f64;
        Ok(RepetitionReport {
            qrr: full as f64 / n,
            srr: scan as f64 / n,
            qrr_dml: full_dml as f64 / n,
            srr_dml: scan_dml as f64 / n,
            select_count,
            full_repetitions: full,
            scanset_repetitions: scan,
            full_repetitions_dml: full_dml,
            scanset_repetitions_dml: scan_dml,
            annotations,
        })
    }
}

pub fn events_from_trace(trace: &WorkloadTrace) -> Vec<AccessEvent> {
    trace
        .entries()
        .iter()
        .map(|e| {
            AccessEvent::new(
                e.entry_id,
                e.is_select(),
                e.query_hash.clone(),
                e.read_tables.iter().map(|t| t.to_string()),
                e.invalidates().map(|t| t.to_string()),
            )
        })
        .collect()
}

pub fn events_from_workload(workload: &Workload) -> Vec<AccessEvent> {
    workload
        .queries
        .iter()
        .map(|q| {
            let is_select = q.query_type == QueryType::Select;
            AccessEvent::new(
                q.seq,
                is_select,
                q.sql.clone(),
                q.read_tables.iter().cloned(),
                if is_select { None } else { q.write_table.clone() },
            )
        })
        .collect()
}

/// Repetition metrics of a trace; only selects are candidates.
pub fn annotate_repetitions(trace: &WorkloadTrace) -> Result<RepetitionReport, FeatureError> {
    annotate_events(&events_from_trace(trace))
}

/// Repetition metrics of a synthesized workload, using SQL-text identity.
pub fn annotate_workload(workload: &Workload) -> Result<RepetitionReport, FeatureError> {
    annotate_events(&events_from_workload(workload))
}

/// Single forward pass.
pub fn annotate_events(events: &[AccessEvent]) -> Result<RepetitionReport, FeatureError> {
    let mut last_write: HashMap<&str, usize> = HashMap::new();
    let mut last_full: HashMap<(&str, &[String]), (usize, usize)> = HashMap::new();
    let mut last_scan: HashMap<&[String], (usize, usize)> = HashMap::new();
    let mut annotations = Vec::new();

    // A prior occurrence at `pos` is still valid when no table in the
    // scanset was written after it.
    let clean_since = |last_write: &HashMap<&str, usize>, scanset: &[String], pos: usize| {
        scanset
            .iter()
            .all(|t| last_write.get(t.as_str()).is_none_or(|&w| w < pos))
    };

    for (pos, ev) in events.iter().enumerate() {
        if ev.is_select {
            let key = (ev.fingerprint.as_str(), ev.scanset.as_slice());
            let full = last_full.get(&key).copied();
            let scan = last_scan.get(ev.scanset.as_slice()).copied();
            annotations.push(RepetitionAnnotation {
                entry_id: ev.id,
                is_full_repetition: full.is_some(),
                is_scanset_repetition: scan.is_some(),
                is_full_repetition_dml_aware: full.is_some_and(|(p, _)| clean_since(&last_write, &ev.scanset, p)),
                is_scanset_repetition_dml_aware: scan.is_some_and(|(p, _)| clean_since(&last_write, &ev.scanset, p)),
                prior_entry_id: full.or(scan).map(|(_, id)| id),
            });
            last_full.insert(key, (pos, ev.id));
            last_scan.insert(ev.scanset.as_slice(), (pos, ev.id));
        }
        if let Some(w) = &ev.write {
            last_write.insert(w.as_str(), pos);
        }
    }
    RepetitionReport::from_annotations(annotations)
}

/// Same result as [`annotate_events`], computed per scanset partition in
/// parallel against precomputed per-table write positions.
pub fn annotate_events_parallel(events: &[AccessEvent]) -> Result<RepetitionReport, FeatureError> {
    let mut writes: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut groups: HashMap<&[String], Vec<usize>> = HashMap::new();
    for (pos, ev) in events.iter().enumerate() {
        if ev.is_select {
            groups.entry(ev.scanset.as_slice()).or_default().push(pos);
        }
        if let Some(w) = &ev.write {
            writes.entry(w.as_str()).or_default().push(pos);
        }
    }
    // any write to the scanset strictly between `from` and `to`
    let written_between = |scanset: &[String], from: usize, to: usize| {
        scanset.iter().any(|t| {
            writes.get(t.as_str()).is_some_and(|ws| {
                let i = ws.partition_point(|&w| w <= from);
                i < ws.len() && ws[i] < to
            })
        })
    };

    let groups: Vec<(&[String], Vec<usize>)> = groups.into_iter().collect();
    let mut annotated: Vec<(usize, RepetitionAnnotation)> = groups
        .par_iter()
        .flat_map_iter(|(scanset, positions)| {
            let mut last_full: HashMap<&str, usize> = HashMap::new();
            let mut last_scan: Option<usize> = None;
            let mut out = Vec::with_capacity(positions.len());
            for &pos in positions {
                let ev = &events[pos];
                let full = last_full.get(ev.fingerprint.as_str()).copied();
                out.push((
                    pos,
                    RepetitionAnnotation {
                        entry_id: ev.id,
                        is_full_repetition: full.is_some(),
                        is_scanset_repetition: last_scan.is_some(),
                        is_full_repetition_dml_aware: full.is_some_and(|p| !written_between(scanset, p, pos)),
                        is_scanset_repetition_dml_aware: last_scan.is_some_and(|p| !written_between(scanset, p, pos)),
                        prior_entry_id: full.or(last_scan).map(|p| events[p].id),
                    },
                ));
                last_full.insert(ev.fingerprint.as_str(), pos);
                last_scan = Some(pos);
            }
            out
        })
        .collect();
    annotated.sort_by_key(|(pos, _)| *pos);
    RepetitionReport::from_annotations(annotated.into_iter().map(|(_, a)| a).collect())
}

/// Absolute per-metric differences between two reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionDelta {
    pub qrr: f64,
    pub srr: f64,
    pub qrr_dml: f64,
    pub srr_dml: f64,
}

pub fn compare_workloads(a: &RepetitionReport, b: &RepetitionReport) -> RepetitionDelta {
    RepetitionDelta {
        qrr: (a.qrr - b.qrr).abs(),
        srr: (a.srr - b.srr).abs(),
        qrr_dml: (a.qrr_dml - b.qrr_dml).abs(),
        srr_dml: (a.srr_dml - b.srr_dml).abs(),
    }
}
