use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CatalogError, SchemaCatalog};
use crate::features::TraceTableStats;
use crate::trace::TableId;

/// Trace table id to schema table name; many-to-one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMapping {
    pub forward: BTreeMap<TableId, String>,
}

impl TableMapping {
    pub fn get(&self, id: TableId) -> Option<&str> {
        self.forward.get(&id).map(String::as_str)
    }

    pub fn inverse(&self) -> BTreeMap<&str, Vec<TableId>> {
        let mut inv: BTreeMap<&str, Vec<TableId>> = BTreeMap::new();
        for (id, name) in &self.forward {
            inv.entry(name.as_str()).or_default().push(*id);
        }
        inv
    }

    /// Distinct images of a set of trace tables, sorted; `None` if any id is
    /// unmapped.
    pub fn images<'a>(&self, ids: impl IntoIterator<Item = &'a TableId>) -> Option<Vec<String>> {
        let mut out = ids
            .into_iter()
            .map(|id| self.forward.get(id).cloned())
            .collect::<Option<Vec<_>>>()?;
        out.sort();
        out.dedup();
        Some(out)
    }
}

/// Rank-based assignment: the trace tables with the largest single-table
/// scans map to the largest schema tables. Unestimated tables follow, by
/// access count. Extra trace tables wrap around the schema ranking.
pub fn map_tables(stats: &TraceTableStats, catalog: &SchemaCatalog) -> Result<TableMapping, CatalogError> {
    let mut schema: Vec<_> = catalog.base_tables().collect();
    if schema.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    schema.sort_by(|a, b| b.total_bytes.cmp(&a.total_bytes).then_with(|| a.name.cmp(&b.name)));

    let mut trace: Vec<_> = stats.tables.values().collect();
    trace.sort_by(|a, b| {
        b.estimated
            .cmp(&a.estimated)
            .then_with(|| b.max_single_table_scan_bytes.cmp(&a.max_single_table_scan_bytes))
            .then_with(|| b.access_count.cmp(&a.access_count))
            .then_with(|| a.table.cmp(&b.table))
    });

    let forward = trace
        .iter()
        .enumerate()
        .map(|(rank, t)| (t.table, schema[rank % schema.len()].name.clone()))
        .collect();
    Ok(TableMapping { forward })
}
