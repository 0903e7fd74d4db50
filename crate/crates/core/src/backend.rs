//! Execution backends for validating synthesized SQL against support data.

use rusqlite::types::{ToSqlOutput, Value as SqlValue};
use rusqlite::{params_from_iter, Connection, ToSql};
use thiserror::Error;

use crate::catalog::{CatalogError, DataAccessor, SchemaCatalog, SchemaDef, StagingPlan, Value};
use crate::sql::{ident, leading_verb};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("statement failed: {message}\n  {sql}")]
    Statement { sql: String, message: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Anything that can run one SQL statement (or a `;`-separated batch).
pub trait ExecutionBackend {
    /// Result rows for a select; rows changed for anything else.
    fn execute(&mut self, sql: &str) -> Result<u64, BackendError>;
}

/// In-process SQLite database loaded from the support data.
///
/// Tables carry no constraints; primary and foreign key columns are indexed.
pub struct SqliteBackend {
    conn: Connection,
}

impl ToSql for Value {
    fn to_sql(&self) -> rusqlite::Result<ToSqlOutput<'_>> {
        Ok(ToSqlOutput::Owned(match self {
            Value::Null => SqlValue::Null,
            Value::Int(v) => SqlValue::Integer(*v),
            Value::Dec(v) => SqlValue::Real(*v),
            Value::Str(s) => SqlValue::Text(s.clone()),
            Value::Date(_) => SqlValue::Text(self.to_string()),
        }))
    }
}

fn failed(sql: &str, e: rusqlite::Error) -> BackendError {
    BackendError::Statement {
        sql: sql.to_string(),
        message: e.to_string(),
    }
}

impl SqliteBackend {
    pub fn open_in_memory() -> Result<Self, BackendError> {
        let conn = Connection::open_in_memory().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(SqliteBackend { conn })
    }

    pub fn load(schema: &SchemaDef, data: &dyn DataAccessor) -> Result<Self, BackendError> {
        let mut backend = Self::open_in_memory()?;
        for table in &schema.tables {
            let cols: Vec<String> = table
                .columns
                .iter()
                .map(|c| format!("{} {}", ident(&c.name), c.kind.sql_type()))
                .collect();
            let name = ident(&table.name);
            backend.run(&format!("CREATE TABLE {name} ({})", cols.join(", ")))?;
            let mut indexed: Vec<&str> = table.primary_key.iter().map(String::as_str).collect();
            indexed.extend(table.foreign_keys.iter().map(|fk| fk.column.as_str()));
            indexed.dedup();
            for col in indexed {
                backend.run(&format!(
                    "CREATE INDEX {} ON {name} ({})",
                    ident(&format!("idx_{}_{}", table.name, col)),
                    ident(col)
                ))?;
            }

            let placeholders = vec!["?"; table.columns.len()].join(", ");
            let insert = format!("INSERT INTO {name} VALUES ({placeholders})");
            let tx = backend.conn.transaction().map_err(|e| failed(&insert, e))?;
            {
                let mut stmt = tx.prepare(&insert).map_err(|e| failed(&insert, e))?;
                data.for_each_row(table, &mut |row| {
                    stmt.execute(params_from_iter(row.iter()))
                        .map(|_| ())
                        .map_err(|e| CatalogError::BadValue {
                            table: table.name.clone(),
                            column: String::new(),
                            line: 0,
                            reason: e.to_string(),
                        })
                })?;
            }
            tx.commit().map_err(|e| failed(&insert, e))?;
        }
        Ok(backend)
    }

    /// Creates and fills every staging twin of the plan.
    pub fn apply_staging(&mut self, plan: &StagingPlan, catalog: &SchemaCatalog) -> Result<(), BackendError> {
        for stmt in plan.script(catalog) {
            self.run(&stmt)?;
        }
        for st in &plan.tables {
            self.run(&format!(
                "CREATE INDEX {} ON {} ({})",
                ident(&format!("idx_{}_{}", st.staging, st.key_column)),
                ident(&st.staging),
                ident(&st.key_column)
            ))?;
        }
        Ok(())
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    fn run(&mut self, sql: &str) -> Result<(), BackendError> {
        self.conn.execute_batch(sql).map_err(|e| failed(sql, e))
    }

    /// Single integer result of a scalar query.
    pub fn scalar(&mut self, sql: &str) -> Result<i64, BackendError> {
        self.conn.query_row(sql, [], |r| r.get(0)).map_err(|e| failed(sql, e))
    }
}

impl ExecutionBackend for SqliteBackend {
    fn execute(&mut self, sql: &str) -> Result<u64, BackendError> {
        match leading_verb(sql).as_deref() {
            Some("select") | Some("with") => {
                let mut stmt = self.conn.prepare(sql).map_err(|e| failed(sql, e))?;
                let mut rows = stmt.query([]).map_err(|e| failed(sql, e))?;
                let mut n = 0;
                while rows.next().map_err(|e| failed(sql, e))?.is_some() {
                    n += 1;
                }
                Ok(n)
            }
            _ => {
                let before = self.conn.total_changes();
                self.run(sql)?;
                Ok(self.conn.total_changes() - before)
            }
        }
    }
}
