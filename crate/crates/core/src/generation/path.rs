use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{SchemaCatalog, TableMapping};
use crate::sql::ident;
use crate::trace::TraceEntry;
use crate::workload::QueryFlag;

use super::GenError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTable {
    pub table: String,
    pub alias: String,
}

/// `alias.column = parent_alias.parent_column`, where `alias` is the table
/// being attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinPredicate {
    pub alias: String,
    pub column: String,
    pub parent_alias: String,
    pub parent_column: String,
}

/// Tables of a query in join order. Every table after the first joins one
/// earlier alias through a PK/FK edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinPath {
    pub tables: Vec<PathTable>,
    pub joins: Vec<JoinPredicate>,
    pub flags: BTreeSet<QueryFlag>,
}

impl JoinPath {
    pub fn distinct_tables(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.tables.iter().map(|t| &t.table).collect();
        set.into_iter().cloned().collect()
    }

    pub fn alias_of(&self, table: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.table == table).map(|t| t.alias.as_str())
    }

    /// `FROM a AS t0 JOIN b AS t1 ON ...`, with table names passed through
    /// `rename` (used to read staging twins instead of base tables).
    pub fn render_from(&self, rename: &dyn Fn(&str) -> String) -> String {
        let mut out = format!("{} AS {}", ident(&rename(&self.tables[0].table)), self.tables[0].alias);
        for (t, j) in self.tables[1..].iter().zip(&self.joins) {
            out.push_str(&format!(
                " JOIN {} AS {} ON {}.{} = {}.{}",
                ident(&rename(&t.table)),
                t.alias,
                j.alias,
                ident(&j.column),
                j.parent_alias,
                ident(&j.parent_column)
            ));
        }
        out
    }

    /// Adds `table` joined to an existing alias when an edge allows it.
    pub fn attach(&mut self, table: &str, catalog: &SchemaCatalog) -> Option<String> {
        for (i, pt) in self.tables.iter().enumerate() {
            if let Some(adj) = catalog
                .graph
                .neighbors(&pt.table)
                .into_iter()
                .find(|a| a.other_table == table)
            {
                let alias = format!("t{}", self.tables.len());
                let join = JoinPredicate {
                    alias: alias.clone(),
                    column: adj.other_column.to_string(),
                    parent_alias: self.tables[i].alias.clone(),
                    parent_column: adj.column.to_string(),
                };
                self.tables.push(PathTable {
                    table: table.to_string(),
                    alias: alias.clone(),
                });
                self.joins.push(join);
                return Some(alias);
            }
        }
        None
    }
}

/// Random walk from the largest mapped table for `num_joins` steps. Each step
/// prefers an unvisited image of the scanset, then any unvisited neighbour,
/// then a revisit under a fresh alias.
pub fn plan_join_path(
    entry: &TraceEntry,
    mapping: &TableMapping,
    catalog: &SchemaCatalog,
    rng: &mut impl Rng,
) -> Result<JoinPath, GenError> {
    let images = mapping
        .images(&entry.read_tables)
        .ok_or(GenError::UnmappedScanset(entry.entry_id))?;
    let size = |t: &str| catalog.table(t).map_or(0, |s| s.total_bytes);
    let start = images
        .iter()
        .max_by(|a, b| size(a).cmp(&size(b)).then_with(|| b.cmp(a)))
        .ok_or(GenError::UnmappedScanset(entry.entry_id))?
        .clone();
    let remaining: BTreeSet<&str> = images.iter().map(String::as_str).filter(|t| *t != start).collect();

    let mut path = JoinPath {
        tables: vec![PathTable {
            table: start,
            alias: "t0".into(),
        }],
        joins: vec![],
        flags: BTreeSet::new(),
    };
    for _ in 0..entry.num_joins {
        let visited: BTreeSet<&str> = path.tables.iter().map(|t| t.table.as_str()).collect();
        // (parent index, parent column, table, column)
        let mut wanted = Vec::new();
        let mut fresh = Vec::new();
        let mut revisit = Vec::new();
        for (i, pt) in path.tables.iter().enumerate() {
            for adj in catalog.graph.neighbors(&pt.table) {
                let cand = (i, adj.column, adj.other_table, adj.other_column);
                if visited.contains(adj.other_table) {
                    revisit.push(cand);
                } else if remaining.contains(adj.other_table) {
                    wanted.push(cand);
                } else {
                    fresh.push(cand);
                }
            }
        }
        let pool = [wanted, fresh, revisit].into_iter().find(|c| !c.is_empty());
        let Some(pool) = pool else {
            path.flags.insert(QueryFlag::DisconnectedStart);
            break;
        };
        let (i, pcol, table, col) = pool[rng.random_range(0..pool.len())];
        let alias = format!("t{}", path.tables.len());
        path.joins.push(JoinPredicate {
            alias: alias.clone(),
            column: col.to_string(),
            parent_alias: path.tables[i].alias.clone(),
            parent_column: pcol.to_string(),
        });
        path.tables.push(PathTable {
            table: table.to_string(),
            alias,
        });
    }
    Ok(path)
}
