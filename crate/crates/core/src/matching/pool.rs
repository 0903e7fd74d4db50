use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sqlparser::ast::{
    BinaryOperator, Expr, JoinConstraint, JoinOperator, Query, Select, SetExpr, Statement, TableFactor, UnaryOperator,
    Value as SqlLiteral, ValueWithSpan,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;
use sqlparser::tokenizer::Span;

use super::MatchError;
use crate::catalog::{ColumnKind, SchemaCatalog, Value};
use crate::digest::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Numeric,
    String,
}

/// A literal constant that instantiation may re-sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LiteralSlot {
    /// Resolved table of the compared column, when known.
    pub table: Option<String>,
    pub column: String,
    pub kind: SlotKind,
    pub original: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryTemplate {
    pub template_id: usize,
    pub name: String,
    /// Normalized text of the original query.
    pub sql: String,
    pub slots: Vec<LiteralSlot>,
    pub join_count: u32,
    pub scanset: BTreeSet<String>,
    /// Concrete statements; the first is the original query.
    pub instantiations: Vec<String>,
    #[serde(skip)]
    query: Box<Query>,
}

impl QueryTemplate {
    pub fn parse(template_id: usize, name: &str, sql: &str) -> Result<QueryTemplate, MatchError> {
        let bad = |reason: String| MatchError::UnparsableQuery {
            name: name.to_string(),
            reason,
        };
        let mut statements = Parser::parse_sql(&GenericDialect {}, sql).map_err(|e| bad(e.to_string()))?;
        if statements.len() != 1 {
            return Err(bad(format!("expected one statement, found {}", statements.len())));
        }
        let Statement::Query(mut query) = statements.remove(0) else {
            return Err(bad("not a select statement".into()));
        };
        let select = select_of(&mut query).ok_or_else(|| bad("not a plain select".into()))?;
        let aliases = alias_map(select);
        if aliases.is_empty() {
            return Err(bad("no base tables in FROM".into()));
        }
        let scanset: BTreeSet<String> = aliases.values().cloned().collect();
        let mut join_count = 0;
        let mut slots = Vec::new();
        for expr in predicate_roots(select) {
            join_count += count_equijoins(expr);
            walk_slots(expr, &mut |col, lit| {
                slots.push(LiteralSlot {
                    table: col.resolve(&aliases),
                    column: col.column.clone(),
                    kind: if matches!(literal_value(lit), Some(SqlLiteral::Number(..))) {
                        SlotKind::Numeric
                    } else {
                        SlotKind::String
                    },
                    original: lit.to_string(),
                });
            });
        }
        let normalized = query.to_string();
        Ok(QueryTemplate {
            template_id,
            name: name.to_string(),
            sql: normalized.clone(),
            slots,
            join_count,
            scanset,
            instantiations: vec![normalized],
            query,
        })
    }

    /// Renders the query with the given slot values, in slot order.
    fn render(&self, values: &[String]) -> String {
        let mut query = self.query.clone();
        let select = select_of(&mut query).expect("parsed as a plain select");
        let mut i = 0;
        for expr in predicate_roots_mut(select) {
            walk_slots_mut(expr, &mut |lit| {
                let slot = &self.slots[i];
                let value = match slot.kind {
                    SlotKind::Numeric => SqlLiteral::Number(values[i].clone(), false),
                    SlotKind::String => SqlLiteral::SingleQuotedString(values[i].clone()),
                };
                *lit = Expr::Value(ValueWithSpan {
                    value,
                    span: Span::empty(),
                });
                i += 1;
            });
        }
        query.to_string()
    }

    /// Fills `instantiations` up to `budget` entries. Numeric slots draw a
    /// uniform quantile from the column histogram; string slots draw from the
    /// most frequent values. Slots on unknown columns keep their literal.
    pub fn instantiate(&mut self, catalog: &SchemaCatalog, budget: usize, seed: u64) {
        self.instantiations.truncate(1);
        if self.slots.is_empty() {
            return;
        }
        let mut seen: BTreeSet<String> = self.instantiations.iter().cloned().collect();
        let attempts = budget.saturating_sub(1) * 4;
        for idx in 1..=attempts as u64 {
            if self.instantiations.len() >= budget {
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, self.template_id as u64, idx));
            let values: Vec<String> = self
                .slots
                .iter()
                .map(|slot| sample_slot(slot, catalog, &mut rng).unwrap_or_else(|| unquote(&slot.original)))
                .collect();
            let sql = self.render(&values);
            if seen.insert(sql.clone()) {
                self.instantiations.push(sql);
            }
        }
    }
}

fn unquote(lit: &str) -> String {
    lit.strip_prefix('\'')
        .and_then(|s| s.strip_suffix('\''))
        .map(|s| s.replace("''", "'"))
        .unwrap_or_else(|| lit.to_string())
}

fn sample_slot(slot: &LiteralSlot, catalog: &SchemaCatalog, rng: &mut ChaCha8Rng) -> Option<String> {
    let stats = catalog.table(slot.table.as_deref()?)?.column(&slot.column)?;
    match (slot.kind, stats.kind) {
        (SlotKind::Numeric, ColumnKind::Integer | ColumnKind::Decimal) => {
            let u: f64 = rng.random_range(0.0..1.0);
            match stats.histogram.quantile(stats.kind, u)? {
                Value::Int(v) => Some(v.to_string()),
                Value::Dec(v) => Some(format!("{}", (v * 100.0).round() / 100.0)),
                _ => None,
            }
        }
        (SlotKind::String, _) if !stats.top_k.is_empty() => {
            let pick = &stats.top_k[rng.random_range(0..stats.top_k.len())];
            Some(pick.value.to_string())
        }
        _ => None,
    }
}

fn select_of(query: &mut Query) -> Option<&mut Select> {
    match query.body.as_mut() {
        SetExpr::Select(s) => Some(s),
        _ => None,
    }
}

fn join_constraint(op: &JoinOperator) -> Option<&JoinConstraint> {
    match op {
        JoinOperator::Join(c)
        | JoinOperator::Inner(c)
        | JoinOperator::Left(c)
        | JoinOperator::LeftOuter(c)
        | JoinOperator::Right(c)
        | JoinOperator::RightOuter(c)
        | JoinOperator::FullOuter(c)
        | JoinOperator::CrossJoin(c) => Some(c),
        _ => None,
    }
}

fn join_constraint_mut(op: &mut JoinOperator) -> Option<&mut JoinConstraint> {
    match op {
        JoinOperator::Join(c)
        | JoinOperator::Inner(c)
        | JoinOperator::Left(c)
        | JoinOperator::LeftOuter(c)
        | JoinOperator::Right(c)
        | JoinOperator::RightOuter(c)
        | JoinOperator::FullOuter(c)
        | JoinOperator::CrossJoin(c) => Some(c),
        _ => None,
    }
}

/// JOIN ... ON conditions in order, then WHERE.
fn predicate_roots(select: &Select) -> Vec<&Expr> {
    let mut out = Vec::new();
    for twj in &select.from {
        for j in &twj.joins {
            if let Some(JoinConstraint::On(e)) = join_constraint(&j.join_operator) {
                out.push(e);
            }
        }
    }
    out.extend(select.selection.as_ref());
    out
}

fn predicate_roots_mut(select: &mut Select) -> Vec<&mut Expr> {
    let mut out = Vec::new();
    for twj in &mut select.from {
        for j in &mut twj.joins {
            if let Some(JoinConstraint::On(e)) = join_constraint_mut(&mut j.join_operator) {
                out.push(e);
            }
        }
    }
    out.extend(select.selection.as_mut());
    out
}

/// alias (or bare table name) -> lowercased table name
fn alias_map(select: &Select) -> HashMap<String, String> {
    let mut out = HashMap::new();
    let mut add = |factor: &TableFactor| {
        if let TableFactor::Table { name, alias, .. } = factor {
            let Some(last) = name.0.last().and_then(|p| p.as_ident()) else {
                return;
            };
            let table = last.value.to_lowercase();
            let key = alias
                .as_ref()
                .map_or_else(|| table.clone(), |a| a.name.value.to_lowercase());
            out.insert(key, table);
        }
    };
    for twj in &select.from {
        add(&twj.relation);
        for j in &twj.joins {
            add(&j.relation);
        }
    }
    out
}

struct ColumnRef {
    qualifier: Option<String>,
    column: String,
}

impl ColumnRef {
    fn of(expr: &Expr) -> Option<ColumnRef> {
        match expr {
            Expr::Identifier(id) => Some(ColumnRef {
                qualifier: None,
                column: id.value.to_lowercase(),
            }),
            Expr::CompoundIdentifier(parts) if parts.len() >= 2 => Some(ColumnRef {
                qualifier: Some(parts[parts.len() - 2].value.to_lowercase()),
                column: parts[parts.len() - 1].value.to_lowercase(),
            }),
            Expr::Nested(inner) => ColumnRef::of(inner),
            _ => None,
        }
    }

    fn resolve(&self, aliases: &HashMap<String, String>) -> Option<String> {
        match &self.qualifier {
            Some(q) => aliases.get(q).cloned(),
            None => {
                let tables: BTreeSet<&String> = aliases.values().collect();
                (tables.len() == 1).then(|| tables.into_iter().next().unwrap().clone())
            }
        }
    }
}

fn literal_value(expr: &Expr) -> Option<&SqlLiteral> {
    match expr {
        Expr::Value(v) => match &v.value {
            lit @ (SqlLiteral::Number(..) | SqlLiteral::SingleQuotedString(_)) => Some(lit),
            _ => None,
        },
        Expr::UnaryOp {
            op: UnaryOperator::Minus,
            expr,
        } => match literal_value(expr)? {
            lit @ SqlLiteral::Number(..) => Some(lit),
            _ => None,
        },
        _ => None,
    }
}

fn is_comparison(op: &BinaryOperator) -> bool {
    use BinaryOperator::*;
    matches!(op, Eq | NotEq | Lt | LtEq | Gt | GtEq)
}

fn count_equijoins(expr: &Expr) -> u32 {
    match expr {
        Expr::BinaryOp {
            left,
            op: BinaryOperator::And | BinaryOperator::Or,
            right,
        } => count_equijoins(left) + count_equijoins(right),
        Expr::Nested(inner) => count_equijoins(inner),
        Expr::BinaryOp {
            left,
            op: BinaryOperator::Eq,
            right,
        } => match (ColumnRef::of(left), ColumnRef::of(right)) {
            (Some(a), Some(b)) if a.qualifier.is_some() && a.qualifier != b.qualifier && b.qualifier.is_some() => 1,
            _ => 0,
        },
        _ => 0,
    }
}

/// Visits `column <op> literal`, `column BETWEEN lit AND lit` and
/// `column IN (lit, ...)` in a fixed order. LIKE patterns are left alone.
fn walk_slots<'a>(expr: &'a Expr, f: &mut dyn FnMut(&ColumnRef, &'a Expr)) {
    match expr {
        Expr::BinaryOp {
            left,
            op: BinaryOperator::And | BinaryOperator::Or,
            right,
        } => {
            walk_slots(left, f);
            walk_slots(right, f);
        }
        Expr::Nested(inner)
        | Expr::UnaryOp {
            op: UnaryOperator::Not,
            expr: inner,
        } => walk_slots(inner, f),
        Expr::BinaryOp { left, op, right } if is_comparison(op) => {
            if let (Some(col), Some(_)) = (ColumnRef::of(left), literal_value(right)) {
                f(&col, right);
            } else if let (Some(_), Some(col)) = (literal_value(left), ColumnRef::of(right)) {
                f(&col, left);
            }
        }
        Expr::Between { expr, low, high, .. } => {
            if let Some(col) = ColumnRef::of(expr) {
                for bound in [low, high] {
                    if literal_value(bound).is_some() {
                        f(&col, bound);
                    }
                }
            }
        }
        Expr::InList { expr, list, .. } => {
            if let Some(col) = ColumnRef::of(expr) {
                for item in list {
                    if literal_value(item).is_some() {
                        f(&col, item);
                    }
                }
            }
        }
        _ => {}
    }
}

fn walk_slots_mut(expr: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match expr {
        Expr::BinaryOp {
            left,
            op: BinaryOperator::And | BinaryOperator::Or,
            right,
        } => {
            walk_slots_mut(left, f);
            walk_slots_mut(right, f);
        }
        Expr::Nested(inner)
        | Expr::UnaryOp {
            op: UnaryOperator::Not,
            expr: inner,
        } => walk_slots_mut(inner, f),
        Expr::BinaryOp { left, op, right } if is_comparison(op) => {
            if ColumnRef::of(left).is_some() && literal_value(right).is_some() {
                f(right);
            } else if literal_value(left).is_some() && ColumnRef::of(right).is_some() {
                f(left);
            }
        }
        Expr::Between { expr, low, high, .. } if ColumnRef::of(expr).is_some() => {
            for bound in [low, high] {
                if literal_value(bound).is_some() {
                    f(bound);
                }
            }
        }
        Expr::InList { expr, list, .. } if ColumnRef::of(expr).is_some() => {
            for item in list {
                if literal_value(item).is_some() {
                    f(item);
                }
            }
        }
        _ => {}
    }
}

/// Templates of a query pool, ordered by file name.
#[derive(Debug, Clone, Default, Serialize)]
pub struct QueryPool {
    pub templates: Vec<QueryTemplate>,
    /// Files that failed to parse, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl QueryPool {
    pub fn from_sources(sources: &[(String, String)]) -> Result<QueryPool, MatchError> {
        let mut pool = QueryPool::default();
        for (name, sql) in sources {
            match QueryTemplate::parse(pool.templates.len(), name, sql) {
                Ok(t) => pool.templates.push(t),
                Err(e) => {
                    log::warn!("skipping pool query {name}: {e}");
                    pool.skipped.push((name.clone(), e.to_string()));
                }
            }
        }
        if pool.templates.is_empty() {
            return Err(MatchError::EmptyPool);
        }
        Ok(pool)
    }

    /// Drops templates reading tables absent from the catalog and renumbers
    /// the rest.
    pub fn check_against(&mut self, catalog: &SchemaCatalog) -> Result<(), MatchError> {
        let mut kept = Vec::new();
        for t in std::mem::take(&mut self.templates) {
            match t.scanset.iter().find(|s| catalog.table(s).is_none()) {
                Some(missing) => {
                    log::warn!("skipping pool query {}: unknown table `{missing}`", t.name);
                    self.skipped
                        .push((t.name.clone(), format!("unknown table `{missing}`")));
                }
                None => kept.push(t),
            }
        }
        for (i, t) in kept.iter_mut().enumerate() {
            t.template_id = i;
        }
        self.templates = kept;
        if self.templates.is_empty() {
            return Err(MatchError::EmptyPool);
        }
        Ok(())
    }

    pub fn instantiate(&mut self, catalog: &SchemaCatalog, budget: usize, seed: u64) {
        for t in &mut self.templates {
            t.instantiate(catalog, budget.max(1), seed);
        }
    }

    pub fn join_range(&self) -> (u32, u32) {
        let min = self.templates.iter().map(|t| t.join_count).min().unwrap_or(0);
        let max = self.templates.iter().map(|t| t.join_count).max().unwrap_or(0);
        (min, max)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Reads every `*.sql` file of a directory, sorted by file name.
pub fn load_query_pool(dir: &Path) -> Result<QueryPool, MatchError> {
    let mut sources = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| MatchError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|e| MatchError::Io {
                path: dir.display().to_string(),
                source: e,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "sql") {
            let text = std::fs::read_to_string(&path).map_err(|e| MatchError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            sources.push((name, text));
        }
    }
    sources.sort();
    QueryPool::from_sources(&sources)
}
