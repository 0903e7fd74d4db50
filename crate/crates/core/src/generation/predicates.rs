use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ColumnKind, ColumnStats, SchemaCatalog, SchemaTable, Value};
use crate::features::TraceTableStats;
use crate::sql::{ident, literal};
use crate::trace::TraceEntry;

use super::path::JoinPath;

/// How a trace entry's `bytes_read` becomes a byte target on the schema.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteTargeting {
    /// Use `bytes_read` as is.
    Absolute,
    /// Scale by the trace's own size signal for the scanned tables, so the
    /// largest observed scan of a table maps to a full scan of its image.
    #[default]
    RelativeToTraceMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasBudget {
    pub alias: String,
    pub table: String,
    pub bytes: f64,
    /// Fraction of the table's rows to keep, in `[0, 1]`.
    pub selectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteAllocation {
    pub target_bytes: f64,
    pub budgets: Vec<AliasBudget>,
    /// The target exceeded the total size of the path's tables.
    pub shortfall: bool,
}

/// Splits the entry's byte target across the path's aliases in proportion
/// to table size.
pub fn allocate_bytes(
    entry: &TraceEntry,
    path: &JoinPath,
    catalog: &SchemaCatalog,
    stats: &TraceTableStats,
    targeting: ByteTargeting,
) -> ByteAllocation {
    let sizes: Vec<f64> = path
        .tables
        .iter()
        .map(|t| catalog.table(&t.table).map_or(0.0, |s| s.total_bytes as f64))
        .collect();
    let total: f64 = sizes.iter().sum();
    let target_bytes = match targeting {
        ByteTargeting::Absolute => entry.bytes_read as f64,
        ByteTargeting::RelativeToTraceMax => {
            let signal: u64 = entry.read_tables.iter().map(|&t| stats.size_signal(t)).sum();
            if signal == 0 {
                total
            } else {
                entry.bytes_read as f64 / signal as f64 * total
            }
        }
    };
    let budgets = path
        .tables
        .iter()
        .zip(&sizes)
        .map(|(t, &size)| {
            let bytes = if total > 0.0 { target_bytes * size / total } else { 0.0 };
            let selectivity = if size > 0.0 {
                (bytes / size).clamp(0.0, 1.0)
            } else {
                1.0
            };
            AliasBudget {
                alias: t.alias.clone(),
                table: t.table.clone(),
                bytes: bytes.min(size),
                selectivity,
            }
        })
        .collect();
    ByteAllocation {
        target_bytes,
        budgets,
        shortfall: target_bytes > total * (1.0 + 1e-9),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    AtMost(Value),
    OneOf(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub alias: String,
    pub column: String,
    pub kind: PredicateKind,
    /// Requested fraction of rows.
    pub target: f64,
    /// Fraction of rows the statistics say the predicate keeps.
    pub estimate: f64,
}

impl Predicate {
    pub fn render(&self) -> String {
        let col = format!("{}.{}", self.alias, ident(&self.column));
        match &self.kind {
            PredicateKind::AtMost(v) => format!("{col} <= {}", literal(v)),
            PredicateKind::OneOf(vs) if vs.len() == 1 => format!("{col} = {}", literal(&vs[0])),
            PredicateKind::OneOf(vs) => {
                let list: Vec<String> = vs.iter().map(literal).collect();
                format!("{col} IN ({})", list.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredicateChoice {
    /// Selectivity 1: nothing to filter.
    Unfiltered,
    Filter(Predicate),
    /// The table has no non-key column to filter on.
    NoEligibleColumn,
}

struct Candidate {
    kind: PredicateKind,
    estimate: f64,
    error: f64,
}

fn ordered_candidate(col: &ColumnStats, rows: f64, s: f64) -> Option<Candidate> {
    let nn = col.non_null() as f64;
    let s_nn = (s * rows / nn).min(1.0);
    let v = col.histogram.quantile(col.kind, s_nn)?;
    let estimate = col.histogram.estimate_le(col.kind, &v) / rows;
    let half_step = match col.kind {
        ColumnKind::String => 0.0,
        _ => col.histogram.granularity_at(&v) / rows / 2.0,
    };
    Some(Candidate {
        kind: PredicateKind::AtMost(v),
        estimate,
        error: (estimate - s).abs() + half_step,
    })
}

/// Greedy membership over the most frequent values.
fn membership_candidate(col: &ColumnStats, rows: f64, s: f64) -> Option<Candidate> {
    let target = s * rows;
    let mut cum = 0.0;
    let mut values = Vec::new();
    for tv in &col.top_k {
        let c = tv.count as f64;
        if (cum + c - target).abs() < (cum - target).abs() {
            cum += c;
            values.push(tv.value.clone());
        }
    }
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Some(Candidate {
        kind: PredicateKind::OneOf(values),
        estimate: cum / rows,
        error: (cum / rows - s).abs(),
    })
}

fn best_candidate(col: &ColumnStats, rows: f64, s: f64, tolerance: f64) -> Option<Candidate> {
    let ordered = ordered_candidate(col, rows, s);
    if col.kind != ColumnKind::String {
        return ordered;
    }
    let member = membership_candidate(col, rows, s);
    match (member, ordered) {
        (Some(m), _) if m.error <= tolerance * s => Some(m),
        (Some(m), Some(o)) => Some(if m.error <= o.error { m } else { o }),
        (m, o) => m.or(o),
    }
}

/// Picks a filter keeping fraction `s` of `table`'s rows. Columns whose
/// estimated error is within `tolerance * s` are chosen uniformly; when
/// none qualifies the closest one is used.
pub fn choose_predicate(
    table: &SchemaTable,
    alias: &str,
    s: f64,
    tolerance: f64,
    rng: &mut impl Rng,
) -> PredicateChoice {
    if s >= 1.0 - 1e-9 {
        return PredicateChoice::Unfiltered;
    }
    let rows = table.row_count as f64;
    let mut scored: Vec<(&ColumnStats, Candidate)> = table
        .columns
        .iter()
        .filter(|c| !table.is_key_column(&c.name) && c.non_null() > 0 && rows > 0.0)
        .filter_map(|c| best_candidate(c, rows, s, tolerance).map(|k| (c, k)))
        .collect();
    if scored.is_empty() {
        return PredicateChoice::NoEligibleColumn;
    }
    let eligible: Vec<usize> = (0..scored.len())
        .filter(|&i| scored[i].1.error <= tolerance * s)
        .collect();
    let pick = if eligible.is_empty() {
        (0..scored.len())
            .min_by(|&a, &b| scored[a].1.error.total_cmp(&scored[b].1.error))
            .unwrap()
    } else {
        eligible[rng.random_range(0..eligible.len())]
    };
    let (col, cand) = scored.swap_remove(pick);
    PredicateChoice::Filter(Predicate {
        alias: alias.to_string(),
        column: col.name.clone(),
        kind: cand.kind,
        target: s,
        estimate: cand.estimate,
    })
}
