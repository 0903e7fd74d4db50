use serde::{Deserialize, Serialize};

use super::schema::SchemaDef;

/// A declared foreign key, `from_table.from_column -> to_table.to_column`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinEdge {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

/// Edge seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacency<'a> {
    pub table: &'a str,
    pub column: &'a str,
    pub other_table: &'a str,
    pub other_column: &'a str,
}

/// Undirected view over PK/FK edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<JoinEdge>,
}

impl JoinGraph {
    pub fn from_schema(schema: &SchemaDef) -> JoinGraph {
        let nodes = schema.tables.iter().map(|t| t.name.clone()).collect();
        let edges = schema
            .tables
            .iter()
            .flat_map(|t| {
                t.foreign_keys.iter().map(move |fk| JoinEdge {
                    from_table: t.name.clone(),
                    from_column: fk.column.clone(),
                    to_table: fk.ref_table.clone(),
                    to_column: fk.ref_column.clone(),
                })
            })
            .collect();
        JoinGraph { nodes, edges }
    }

    /// Edges incident to `table`, oriented away from it, in declaration order.
    pub fn neighbors<'a>(&'a self, table: &str) -> Vec<Adjacency<'a>> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.from_table == table {
                out.push(Adjacency {
                    table: &e.from_table,
                    column: &e.from_column,
                    other_table: &e.to_table,
                    other_column: &e.to_column,
                });
            }
            if e.to_table == table {
                out.push(Adjacency {
                    table: &e.to_table,
                    column: &e.to_column,
                    other_table: &e.from_table,
                    other_column: &e.from_column,
                });
            }
        }
        out
    }

    pub fn degree(&self, table: &str) -> usize {
        self.neighbors(table).len()
    }

    pub fn are_adjacent(&self, a: &str, b: &str) -> bool {
        self.neighbors(a).iter().any(|adj| adj.other_table == b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tables() -> SchemaDef {
        SchemaDef::from_json(
            r#"{"tables":[
                {"name":"a","columns":[{"name":"id","kind":"integer"}],"primary_key":["id"]},
                {"name":"b","columns":[{"name":"id","kind":"integer"},{"name":"a_id","kind":"integer"}],
                 "primary_key":["id"],"foreign_keys":[{"column":"a_id","references":"a.id"}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_fk_gives_one_edge() {
        let g = JoinGraph::from_schema(&two_tables());
        assert_eq!(g.edges.len(), 1);
        assert_eq!(
            g.edges[0],
            JoinEdge {
                from_table: "b".into(),
                from_column: "a_id".into(),
                to_table: "a".into(),
                to_column: "id".into()
            }
        );
    }

    #[test]
    fn walkable_both_ways() {
        let g = JoinGraph::from_schema(&two_tables());
        assert!(g.are_adjacent("a", "b"));
        assert!(g.are_adjacent("b", "a"));
        let from_a = g.neighbors("a");
        assert_eq!((from_a[0].column, from_a[0].other_column), ("id", "a_id"));
    }
}
