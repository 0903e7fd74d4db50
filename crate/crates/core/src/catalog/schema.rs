use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CatalogError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Integer,
    Decimal,
    String,
    Date,
}

impl ColumnKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnKind::Integer | ColumnKind::Decimal)
    }

    pub fn sql_type(self) -> &'static str {
        match self {
            ColumnKind::Integer => "INTEGER",
            ColumnKind::Decimal => "REAL",
            ColumnKind::String => "TEXT",
            ColumnKind::Date => "TEXT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unique: bool,
}

/// `column` references `table.column`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyDef {
    pub column: String,
    pub ref_table: String,
    pub ref_column: String,
}

#[derive(Serialize, Deserialize)]
struct ForeignKeyRepr {
    column: String,
    references: String,
}

impl Serialize for ForeignKeyDef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ForeignKeyRepr {
            column: self.column.clone(),
            references: format!("{}.{}", self.ref_table, self.ref_column),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ForeignKeyDef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ForeignKeyRepr::deserialize(d)?;
        let (table, column) = repr.references.split_once('.').ok_or_else(|| {
            serde::de::Error::custom(format!(
                "foreign key reference `{}` is not of the form table.column",
                repr.references
            ))
        })?;
        Ok(ForeignKeyDef {
            column: repr.column,
            ref_table: table.to_string(),
            ref_column: column.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    #[serde(default)]
    pub primary_key: Vec<String>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKeyDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_foreign_key(&self, column: &str) -> bool {
        self.foreign_keys.iter().any(|fk| fk.column == column)
    }

    pub fn is_primary_key(&self, column: &str) -> bool {
        self.primary_key.iter().any(|c| c == column)
    }
}

/// Contents of `schema.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDef {
    pub tables: Vec<TableDef>,
}

impl SchemaDef {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Checks primary keys and foreign keys against declared columns.
    pub fn validate(&self) -> Result<(), CatalogError> {
        for t in &self.tables {
            for pk in &t.primary_key {
                if t.column(pk).is_none() {
                    return Err(CatalogError::UnknownColumn {
                        table: t.name.clone(),
                        column: pk.clone(),
                    });
                }
            }
            for fk in &t.foreign_keys {
                let resolved = t.column(&fk.column).is_some()
                    && self
                        .table(&fk.ref_table)
                        .is_some_and(|r| r.column(&fk.ref_column).is_some());
                if !resolved {
                    return Err(CatalogError::UnresolvedForeignKey {
                        table: t.name.clone(),
                        column: fk.column.clone(),
                        target: format!("{}.{}", fk.ref_table, fk.ref_column),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A typed cell. Dates are days since 1970-01-01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Null,
    Int(i64),
    Dec(f64),
    Str(String),
    Date(i32),
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

impl Value {
    pub fn parse(kind: ColumnKind, raw: &str) -> Result<Value, String> {
        if raw.is_empty() {
            return Ok(Value::Null);
        }
        match kind {
            ColumnKind::Integer => raw.trim().parse().map(Value::Int).map_err(|e| e.to_string()),
            ColumnKind::Decimal => match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Value::Dec(v)),
                Ok(_) => Err("non-finite decimal".into()),
                Err(e) => Err(e.to_string()),
            },
            ColumnKind::String => Ok(Value::Str(raw.to_string())),
            ColumnKind::Date => NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                .map(|d| Value::Date((d - EPOCH).num_days() as i32))
                .map_err(|e| e.to_string()),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Position on the numeric axis for ordered kinds.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Dec(v) => Some(*v),
            Value::Date(d) => Some(*d as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn date_from_days(days: i32) -> NaiveDate {
        EPOCH + chrono::Duration::days(days as i64)
    }

    /// Total order within one kind; nulls sort first.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Less,
            (_, Value::Null) => Ordering::Greater,
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                _ => Ordering::Equal,
            },
        }
    }

    /// Raw text form used in data files.
    pub fn to_raw(&self) -> String {
        match self {
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Dec(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{}", Value::date_from_days(*d).format("%Y-%m-%d")),
        }
    }
}

/// Streams typed rows of a table, in schema column order.
pub trait DataAccessor: Sync {
    fn for_each_row(
        &self,
        table: &TableDef,
        f: &mut dyn FnMut(Vec<Value>) -> Result<(), CatalogError>,
    ) -> Result<(), CatalogError>;
}

/// A directory holding `schema.json` and one `<table>.csv` per table.
///
/// Each CSV has a header naming the columns; an empty field is NULL.
#[derive(Debug, Clone)]
pub struct CsvDirectory {
    dir: PathBuf,
}

impl CsvDirectory {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CsvDirectory { dir: dir.into() }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn load_schema(&self) -> Result<SchemaDef, CatalogError> {
        let path = self.dir.join("schema.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let schema = SchemaDef::from_json(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn table_path(&self, table: &str) -> PathBuf {
        self.dir.join(format!("{table}.csv"))
    }
}

impl DataAccessor for CsvDirectory {
    fn for_each_row(
        &self,
        table: &TableDef,
        f: &mut dyn FnMut(Vec<Value>) -> Result<(), CatalogError>,
    ) -> Result<(), CatalogError> {
        let path = self.table_path(&table.name);
        let file = File::open(&path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut reader = csv::Reader::from_reader(BufReader::new(file));
        let header = reader.headers()?.clone();
        let positions: Vec<usize> = table
            .columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h.trim() == c.name)
                    .ok_or_else(|| CatalogError::UnknownColumn {
                        table: table.name.clone(),
                        column: c.name.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(positions.len());
            for (col, &p) in table.columns.iter().zip(&positions) {
                let raw = record.get(p).unwrap_or("");
                let value = Value::parse(col.kind, raw).map_err(|reason| CatalogError::BadValue {
                    table: table.name.clone(),
                    column: col.name.clone(),
                    line: i + 2,
                    reason,
                })?;
                row.push(value);
            }
            f(row)?;
        }
        Ok(())
    }
}

/// Rows held in memory; used by tests and by callers that already have data.
#[derive(Debug, Clone, Default)]
pub struct InMemoryData {
    pub tables: std::collections::HashMap<String, Vec<Vec<Value>>>,
}

impl DataAccessor for InMemoryData {
    fn for_each_row(
        &self,
        table: &TableDef,
        f: &mut dyn FnMut(Vec<Value>) -> Result<(), CatalogError>,
    ) -> Result<(), CatalogError> {
        for row in self.tables.get(&table.name).into_iter().flatten() {
            f(row.clone())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_values() {
        assert_eq!(Value::parse(ColumnKind::Integer, "42"), Ok(Value::Int(42)));
        assert_eq!(Value::parse(ColumnKind::Integer, ""), Ok(Value::Null));
        assert_eq!(Value::parse(ColumnKind::Date, "1970-01-11"), Ok(Value::Date(10)));
        assert!(Value::parse(ColumnKind::Decimal, "abc").is_err());
        assert_eq!(Value::Date(10).to_string(), "1970-01-11");
    }

    #[test]
    fn foreign_key_json() {
        let schema = SchemaDef::from_json(
            r#"{"tables":[
                {"name":"a","columns":[{"name":"id","kind":"integer"}],"primary_key":["id"]},
                {"name":"b","columns":[{"name":"id","kind":"integer"},{"name":"a_id","kind":"integer"}],
                 "primary_key":["id"],"foreign_keys":[{"column":"a_id","references":"a.id"}]}]}"#,
        )
        .unwrap();
        schema.validate().unwrap();
        let fk = &schema.tables[1].foreign_keys[0];
        assert_eq!((fk.ref_table.as_str(), fk.ref_column.as_str()), ("a", "id"));
        let back: SchemaDef = serde_json::from_str(&serde_json::to_string(&schema).unwrap()).unwrap();
        assert_eq!(back, schema);
    }

    #[test]
    fn unresolved_foreign_key() {
        let schema = SchemaDef::from_json(
            r#"{"tables":[{"name":"b","columns":[{"name":"a_id","kind":"integer"}],
                 "foreign_keys":[{"column":"a_id","references":"a.id"}]}]}"#,
        )
        .unwrap();
        assert!(matches!(
            schema.validate(),
            Err(CatalogError::UnresolvedForeignKey { .. })
        ));
    }
}
