//! Minimal single-row DML that acts as a cache invalidator while leaving the
//! data set (nearly) unchanged.

use std::collections::HashMap;

use crate::catalog::{ColumnKind, SchemaTable, Value};
use crate::sql::{ident, literal};
use crate::workload::QueryFlag;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalDml {
    pub sql: String,
    pub flags: Vec<QueryFlag>,
}

/// Per-table counters for fresh insert keys.
#[derive(Debug, Clone, Default)]
pub struct DmlCounters {
    next: HashMap<String, i64>,
}

impl DmlCounters {
    fn bump(&mut self, table: &str) -> i64 {
        let n = self.next.entry(table.to_string()).or_insert(0);
        *n += 1;
        *n - 1
    }
}

fn noop(table: &SchemaTable) -> MinimalDml {
    MinimalDml {
        sql: format!("DELETE FROM {} WHERE 1 = 0", ident(&table.name)),
        flags: vec![QueryFlag::NoopDml],
    }
}

fn anchor_predicate(table: &SchemaTable, row: &[Value]) -> String {
    let cols: Vec<usize> = if table.primary_key.is_empty() {
        (0..table.columns.len()).filter(|&i| !row[i].is_null()).collect()
    } else {
        table
            .primary_key
            .iter()
            .filter_map(|pk| table.columns.iter().position(|c| &c.name == pk))
            .collect()
    };
    cols.iter()
        .map(|&i| format!("{} = {}", ident(&table.columns[i].name), literal(&row[i])))
        .collect::<Vec<_>>()
        .join(" AND ")
}

fn insert_row(table: &SchemaTable, row: &[Value]) -> String {
    let cols: Vec<String> = table.columns.iter().map(|c| ident(&c.name).into_owned()).collect();
    let vals: Vec<String> = row.iter().map(literal).collect();
    format!(
        "INSERT INTO {} ({}) VALUES ({})",
        ident(&table.name),
        cols.join(", "),
        vals.join(", ")
    )
}

/// Deletes the anchor row and puts it back.
pub fn delete_reinsert(table: &SchemaTable) -> MinimalDml {
    let Some(row) = &table.sample_row else {
        return noop(table);
    };
    MinimalDml {
        sql: format!(
            "DELETE FROM {} WHERE {}; {}",
            ident(&table.name),
            anchor_predicate(table, row),
            insert_row(table, row)
        ),
        flags: vec![],
    }
}

/// One new row copied from the anchor with a fresh key. The key lies above
/// both the base and the staged key domains.
pub fn single_row_insert(table: &SchemaTable, counters: &mut DmlCounters) -> MinimalDml {
    let (Some(row), Some(key), Some((lo, hi))) = (&table.sample_row, table.integer_key(), table.key_range()) else {
        return delete_reinsert(table);
    };
    let offset = hi.max(hi - lo + 1);
    let fresh = hi + 2 * offset + 1 + counters.bump(&table.name);
    let mut row = row.clone();
    for (i, c) in table.columns.iter().enumerate() {
        if c.name == key {
            row[i] = Value::Int(fresh);
        } else if c.is_unique && c.kind == ColumnKind::String {
            if let Value::Str(s) = &row[i] {
                row[i] = Value::Str(format!("{s}_m{fresh}"));
            }
        }
    }
    MinimalDml {
        sql: insert_row(table, &row),
        flags: vec![],
    }
}

/// Sets a non-key column of the anchor row to itself; falls back to
/// delete-and-reinsert when every column is a key.
pub fn noop_update(table: &SchemaTable) -> MinimalDml {
    let Some(row) = &table.sample_row else {
        return noop(table);
    };
    match table.columns.iter().find(|c| !table.is_key_column(&c.name)) {
        Some(c) if !table.primary_key.is_empty() => {
            let col = ident(&c.name);
            MinimalDml {
                sql: format!(
                    "UPDATE {} SET {col} = {col} WHERE {}",
                    ident(&table.name),
                    anchor_predicate(table, row)
                ),
                flags: vec![],
            }
        }
        _ => delete_reinsert(table),
    }
}
