use serde::{Deserialize, Serialize};

use super::{ColumnKind, SchemaCatalog};
use crate::sql::{ident, string_literal};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingOptions {
    pub suffix: String,
    /// Marker appended to unique string values, followed by the source key.
    pub unique_marker: String,
    /// Copy only rows with `pk % m = 0`; full copy when `None`.
    pub sample_modulus: Option<u64>,
}

impl Default for StagingOptions {
    fn default() -> Self {
        StagingOptions {
            suffix: "_staging".into(),
            unique_marker: "_s".into(),
            sample_modulus: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagingExclusion {
    NoPrimaryKey,
    NonIntegerKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedTable {
    pub base: String,
    pub staging: String,
    pub key_column: String,
    /// Added to every staged key; staged keys never collide with base keys.
    pub key_offset: i64,
    /// Foreign key columns shifted by the referenced table's offset.
    pub shifted_fks: Vec<(String, i64)>,
    /// Unique non-key string columns that receive the marker suffix.
    pub suffixed_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingPlan {
    pub options: StagingOptions,
    pub tables: Vec<StagedTable>,
    pub excluded: Vec<(String, StagingExclusion)>,
}

impl StagingPlan {
    pub fn staged(&self, base: &str) -> Option<&StagedTable> {
        self.tables.iter().find(|t| t.base == base)
    }

    /// Base table of a staging twin name.
    pub fn base_of(&self, staging: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|t| t.staging == staging)
            .map(|t| t.base.as_str())
    }

    /// DDL and copy statements that materialize every staging twin.
    pub fn script(&self, catalog: &SchemaCatalog) -> Vec<String> {
        let mut out = Vec::new();
        for st in &self.tables {
            let Some(base) = catalog.table(&st.base) else { continue };
            let cols: Vec<String> = base
                .columns
                .iter()
                .map(|c| format!("{} {}", ident(&c.name), c.kind.sql_type()))
                .collect();
            out.push(format!("CREATE TABLE {} ({})", ident(&st.staging), cols.join(", ")));

            let key = ident(&st.key_column);
            let exprs: Vec<String> = base
                .columns
                .iter()
                .map(|c| {
                    let name = ident(&c.name);
                    if c.name == st.key_column {
                        format!("{name} + {}", st.key_offset)
                    } else if let Some((_, off)) = st.shifted_fks.iter().find(|(col, _)| *col == c.name) {
                        format!("{name} + {off}")
                    } else if st.suffixed_columns.contains(&c.name) {
                        format!(
                            "{name} || {} || CAST({key} AS VARCHAR)",
                            string_literal(&self.options.unique_marker)
                        )
                    } else {
                        name.into_owned()
                    }
                })
                .collect();
            let names: Vec<String> = base.columns.iter().map(|c| ident(&c.name).into_owned()).collect();
            let filter = match self.options.sample_modulus {
                Some(m) if m > 1 => format!(" WHERE {key} % {m} = 0"),
                _ => String::new(),
            };
            out.push(format!(
                "INSERT INTO {} ({}) SELECT {} FROM {}{}",
                ident(&st.staging),
                names.join(", "),
                exprs.join(", "),
                ident(&st.base),
                filter
            ));
        }
        out
    }
}

pub fn build_staging_plan(catalog: &SchemaCatalog, options: StagingOptions) -> StagingPlan {
    let mut tables = Vec::new();
    let mut excluded = Vec::new();
    for t in catalog.base_tables() {
        let Some(key) = t.integer_key() else {
            let why = if t.primary_key.is_empty() {
                StagingExclusion::NoPrimaryKey
            } else {
                StagingExclusion::NonIntegerKey
            };
            log::warn!("table `{}` excluded from staging: {:?}", t.name, why);
            excluded.push((t.name.clone(), why));
            continue;
        };
        let key_offset = t.key_range().map_or(0, |(lo, hi)| hi.max(hi - lo + 1));
        tables.push(StagedTable {
            base: t.name.clone(),
            staging: format!("{}{}", t.name, options.suffix),
            key_column: key.to_string(),
            key_offset,
            shifted_fks: Vec::new(),
            suffixed_columns: t
                .columns
                .iter()
                .filter(|c| c.kind == ColumnKind::String && c.is_unique && !t.is_key_column(&c.name))
                .map(|c| c.name.clone())
                .collect(),
        });
    }
    // references into a staged parent's key follow that parent's shift
    let offsets: Vec<(String, String, i64)> = tables
        .iter()
        .map(|s| (s.base.clone(), s.key_column.clone(), s.key_offset))
        .collect();
    for st in &mut tables {
        let t = catalog.table(&st.base).expect("staged table comes from the catalog");
        for fk in &t.foreign_keys {
            if let Some((_, _, off)) = offsets
                .iter()
                .find(|(b, k, _)| *b == fk.ref_table && *k == fk.ref_column)
            {
                st.shifted_fks.push((fk.column.clone(), *off));
            }
        }
    }
    StagingPlan {
        options,
        tables,
        excluded,
    }
}
