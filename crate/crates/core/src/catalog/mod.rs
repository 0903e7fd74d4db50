//! Support-database analysis: column statistics, the PK/FK join graph,
//! trace-to-schema table mapping and staging plans for insert synthesis.

mod graph;
mod mapping;
mod schema;
mod staging;
mod stats;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{Adjacency, JoinEdge, JoinGraph};
pub use mapping::{map_tables, TableMapping};
pub use schema::{
    ColumnDef, ColumnKind, CsvDirectory, DataAccessor, ForeignKeyDef, InMemoryData, SchemaDef, TableDef, Value,
};
pub use staging::{build_staging_plan, StagedTable, StagingExclusion, StagingOptions, StagingPlan};
pub use stats::{Bucket, ColumnStats, Histogram, TopValue, DEFAULT_BUCKETS, DEFAULT_TOP_K};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("foreign key {table}.{column} references missing {target}")]
    UnresolvedForeignKey {
        table: String,
        column: String,
        target: String,
    },
    #[error("table `{table}` has no column `{column}`")]
    UnknownColumn { table: String, column: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("catalog has no base tables")]
    EmptyCatalog,
    #[error("{table}.{column} line {line}: {reason}")]
    BadValue {
        table: String,
        column: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub buckets: usize,
    pub top_k: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            buckets: DEFAULT_BUCKETS,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaTable {
    pub name: String,
    pub row_count: u64,
    /// `row_count` times the summed average column widths.
    pub total_bytes: u64,
    pub columns: Vec<ColumnStats>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKeyDef>,
    pub is_staging: bool,
    /// First row of the data file, used as the anchor for delete-and-reinsert
    /// statements.
    pub sample_row: Option<Vec<Value>>,
}

impl SchemaTable {
    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn is_key_column(&self, name: &str) -> bool {
        self.primary_key.iter().any(|c| c == name) || self.foreign_keys.iter().any(|fk| fk.column == name)
    }

    /// The primary key column when it is a single integer column.
    pub fn integer_key(&self) -> Option<&str> {
        match self.primary_key.as_slice() {
            [pk] if self.column(pk).is_some_and(|c| c.kind == ColumnKind::Integer) => Some(pk),
            _ => None,
        }
    }

    pub fn key_range(&self) -> Option<(i64, i64)> {
        let col = self.column(self.integer_key()?)?;
        Some((col.min.as_ref()?.as_i64()?, col.max.as_ref()?.as_i64()?))
    }

    pub fn to_def(&self) -> TableDef {
        TableDef {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| ColumnDef {
                    name: c.name.clone(),
                    kind: c.kind,
                    unique: c.is_unique,
                })
                .collect(),
            primary_key: self.primary_key.clone(),
            foreign_keys: self.foreign_keys.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub tables: Vec<SchemaTable>,
    pub graph: JoinGraph,
}

impl SchemaCatalog {
    pub fn table(&self, name: &str) -> Option<&SchemaTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn base_tables(&self) -> impl Iterator<Item = &SchemaTable> {
        self.tables.iter().filter(|t| !t.is_staging)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), CatalogError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load_json(path: &Path) -> Result<SchemaCatalog, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Computes per-column statistics with one pass over each table's rows,
/// tables in parallel. Empty tables are allowed and get degenerate stats.
pub fn analyze_schema(
    schema: &SchemaDef,
    data: &dyn DataAccessor,
    options: AnalyzeOptions,
) -> Result<SchemaCatalog, CatalogError> {
    schema.validate()?;
    let tables = schema
        .tables
        .par_iter()
        .map(|def| analyze_table(def, data, options))
        .collect::<Result<Vec<_>, _>>()?;
    for t in tables.iter().filter(|t| t.row_count == 0) {
        log::warn!("table `{}` is empty; statistics are degenerate", t.name);
    }
    Ok(SchemaCatalog {
        tables,
        graph: JoinGraph::from_schema(schema),
    })
}

fn analyze_table(
    def: &TableDef,
    data: &dyn DataAccessor,
    options: AnalyzeOptions,
) -> Result<SchemaTable, CatalogError> {
    let mut columns: Vec<Vec<Value>> = vec![Vec::new(); def.columns.len()];
    let mut sample_row = None;
    data.for_each_row(def, &mut |row| {
        if sample_row.is_none() {
            sample_row = Some(row.clone());
        }
        for (col, v) in columns.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    })?;
    let row_count = columns.first().map_or(0, Vec::len) as u64;
    let stats: Vec<ColumnStats> = def
        .columns
        .iter()
        .zip(columns)
        .map(|(c, values)| ColumnStats::compute(c, values, options.buckets, options.top_k))
        .collect();
    let width: f64 = stats.iter().map(|c| c.avg_width_bytes).sum();
    Ok(SchemaTable {
        name: def.name.clone(),
        row_count,
        total_bytes: (row_count as f64 * width).round() as u64,
        columns: stats,
        primary_key: def.primary_key.clone(),
        foreign_keys: def.foreign_keys.clone(),
        is_staging: false,
        sample_row,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn analyze_parent_child() {
        let cat = parent_child_catalog(100);
        let parent = cat.table("parent").unwrap();
        assert_eq!(parent.row_count, 100);
        assert_eq!(parent.integer_key(), Some("id"));
        assert_eq!(parent.key_range(), Some((1, 100)));
        assert!(parent.column("name").unwrap().is_unique);
        let child = cat.table("child").unwrap();
        assert_eq!(child.total_bytes, 200 * 24);
        assert!(child.is_key_column("parent_id"));
        assert!(!child.column("qty").unwrap().is_unique);
        assert_eq!(cat.graph.edges.len(), 1);
        assert_eq!(parent.sample_row.as_ref().unwrap()[0], Value::Int(1));
    }

    #[test]
    fn empty_table_allowed() {
        let (schema, mut data) = parent_child(3);
        data.tables.remove("child");
        let cat = analyze_schema(&schema, &data, AnalyzeOptions::default()).unwrap();
        let child = cat.table("child").unwrap();
        assert_eq!(child.row_count, 0);
        assert_eq!(child.total_bytes, 0);
        assert_eq!(child.key_range(), None);
    }

    #[test]
    fn catalog_json_round_trip() {
        let cat = parent_child_catalog(10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        cat.save_json(&path).unwrap();
        assert_eq!(SchemaCatalog::load_json(&path).unwrap(), cat);
    }
}
