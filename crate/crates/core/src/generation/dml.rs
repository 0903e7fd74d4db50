use std::collections::BTreeSet;

use rand::Rng;

use crate::catalog::{ColumnKind, SchemaTable, StagedTable, Value};
use crate::matching::{delete_reinsert, noop_update};
use crate::sql::{ident, literal};
use crate::workload::QueryFlag;

/// Rows touched by one synthesized update or delete, and inserted by one
/// insert: a small fraction of the table, at least one.
pub fn row_cap(table: &SchemaTable, fraction: f64) -> i64 {
    ((table.row_count as f64 * fraction).floor() as i64).max(1)
}

pub(super) struct DmlText {
    pub sql: String,
    pub flags: BTreeSet<QueryFlag>,
}

impl DmlText {
    fn minimal(dml: crate::matching::MinimalDml, extra: QueryFlag) -> DmlText {
        let mut flags: BTreeSet<QueryFlag> = dml.flags.into_iter().collect();
        if !flags.contains(&QueryFlag::NoopDml) {
            flags.insert(extra);
        }
        DmlText { sql: dml.sql, flags }
    }
}

fn random_window(lo: i64, hi: i64, cap: i64, rng: &mut impl Rng) -> (i64, i64) {
    let last_start = (hi - cap + 1).max(lo);
    let a = rng.random_range(lo..=last_start);
    (a, a + cap - 1)
}

fn domain_value(kind: ColumnKind, stats: &crate::catalog::ColumnStats, rng: &mut impl Rng) -> Option<Value> {
    if (kind == ColumnKind::String || stats.histogram.buckets.is_empty()) && !stats.top_k.is_empty() {
        return Some(stats.top_k[rng.random_range(0..stats.top_k.len())].value.clone());
    }
    let v = stats.histogram.quantile(kind, rng.random_range(0.0..=1.0))?;
    Some(match v {
        Value::Dec(x) => Value::Dec((x * 100.0).round() / 100.0),
        other => other,
    })
}

/// Sets one ordered, non-key, non-unique column over a short key range.
pub(super) fn range_update(table: &SchemaTable, fraction: f64, rng: &mut impl Rng) -> DmlText {
    let (Some(key), Some((lo, hi))) = (table.integer_key(), table.key_range()) else {
        return DmlText::minimal(noop_update(table), QueryFlag::FallbackMinimalDml);
    };
    let eligible: Vec<_> = table
        .columns
        .iter()
        .filter(|c| !table.is_key_column(&c.name) && !c.is_unique && c.non_null() > 0)
        .collect();
    if eligible.is_empty() {
        return DmlText::minimal(noop_update(table), QueryFlag::NoEligibleColumn);
    }
    let col = eligible[rng.random_range(0..eligible.len())];
    let Some(value) = domain_value(col.kind, col, rng) else {
        return DmlText::minimal(noop_update(table), QueryFlag::NoEligibleColumn);
    };
    let (a, b) = random_window(lo, hi, row_cap(table, fraction), rng);
    DmlText {
        sql: format!(
            "UPDATE {} SET {} = {} WHERE {} BETWEEN {a} AND {b}",
            ident(&table.name),
            ident(&col.name),
            literal(&value),
            ident(key)
        ),
        flags: BTreeSet::new(),
    }
}

/// Deletes rows added by earlier synthesized inserts when there are any,
/// else a short range of base rows.
pub(super) fn range_delete(table: &SchemaTable, fraction: f64, pending_inserts: i64, rng: &mut impl Rng) -> DmlText {
    if table.sample_row.is_none() {
        return DmlText::minimal(delete_reinsert(table), QueryFlag::NoopDml);
    }
    let (Some(key), Some((lo, hi))) = (table.integer_key(), table.key_range()) else {
        return DmlText::minimal(delete_reinsert(table), QueryFlag::FallbackMinimalDml);
    };
    let cap = row_cap(table, fraction);
    let name = ident(&table.name);
    let pk = ident(key);
    let sql = if pending_inserts > 0 {
        format!(
            "DELETE FROM {name} WHERE {pk} IN (SELECT {pk} FROM {name} WHERE {pk} > {hi} ORDER BY {pk} LIMIT {cap})"
        )
    } else {
        let (a, b) = random_window(lo, hi, cap, rng);
        format!("DELETE FROM {name} WHERE {pk} BETWEEN {a} AND {b}")
    };
    DmlText {
        sql,
        flags: BTreeSet::new(),
    }
}

/// `INSERT INTO w SELECT ... FROM w_staging` gated on the read component.
/// `gate` is either `IN (subquery)` on the staged key, or an `EXISTS` probe.
pub(super) fn staged_insert(table: &SchemaTable, staged: &StagedTable, gate: Option<Gate>, limit: i64) -> String {
    let cols: Vec<String> = table.columns.iter().map(|c| ident(&c.name).into_owned()).collect();
    let src: Vec<String> = cols.iter().map(|c| format!("s.{c}")).collect();
    let pk = ident(&staged.key_column);
    let name = ident(&table.name);
    let mut conds = Vec::new();
    match gate {
        Some(Gate::Keys(sub)) => conds.push(format!("s.{pk} IN ({sub})")),
        Some(Gate::Exists(sub)) => conds.push(format!("EXISTS ({sub})")),
        None => {}
    }
    conds.push(format!("s.{pk} NOT IN (SELECT {pk} FROM {name})"));
    format!(
        "INSERT INTO {name} ({}) SELECT {} FROM {} AS s WHERE {} ORDER BY s.{pk} LIMIT {limit}",
        cols.join(", "),
        src.join(", "),
        ident(&staged.staging),
        conds.join(" AND ")
    )
}

pub(super) enum Gate {
    Keys(String),
    Exists(String),
}
