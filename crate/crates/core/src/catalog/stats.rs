use serde::{Deserialize, Serialize};

use super::schema::{ColumnDef, ColumnKind, Value};

pub const DEFAULT_BUCKETS: usize = 64;
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lower: Value,
    pub upper: Value,
    pub count: u64,
    pub distinct: u64,
}

/// Equi-depth histogram over the non-null values of a column.
///
/// Bucket upper bounds absorb every duplicate of the boundary value, so the
/// cumulative count at each upper bound is exact.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub buckets: Vec<Bucket>,
}

impl Histogram {
    /// `sorted` must be ordered by [`Value::total_cmp`] and free of nulls.
    pub fn build(sorted: &[Value], buckets: usize) -> Histogram {
        let n = sorted.len();
        if n == 0 || buckets == 0 {
            return Histogram::default();
        }
        let b = buckets.min(n);
        let mut out = Vec::with_capacity(b);
        let mut start = 0;
        for i in 0..b {
            let mut end = ((i + 1) * n).div_ceil(b);
            if end <= start {
                continue;
            }
            while end < n && sorted[end] == sorted[end - 1] {
                end += 1;
            }
            let slice = &sorted[start..end];
            let distinct = 1 + slice.windows(2).filter(|w| w[0] != w[1]).count() as u64;
            out.push(Bucket {
                lower: slice[0].clone(),
                upper: slice[slice.len() - 1].clone(),
                count: slice.len() as u64,
                distinct,
            });
            start = end;
            if start >= n {
                break;
            }
        }
        Histogram { buckets: out }
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum()
    }

    /// Estimated number of values `<= v`.
    pub fn estimate_le(&self, kind: ColumnKind, v: &Value) -> f64 {
        let mut cum = 0.0;
        for b in &self.buckets {
            if v.total_cmp(&b.upper).is_ge() {
                cum += b.count as f64;
                continue;
            }
            if v.total_cmp(&b.lower).is_lt() {
                break;
            }
            cum += b.count as f64 * within_bucket(kind, b, v);
            break;
        }
        cum
    }

    /// Value `v` whose cumulative fraction `F(v)` is closest to `s`.
    pub fn quantile(&self, kind: ColumnKind, s: f64) -> Option<Value> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let target = s.clamp(0.0, 1.0) * total as f64;
        if kind == ColumnKind::String {
            return self.nearest_boundary(target).map(|(v, _)| v);
        }
        let mut cum = 0.0;
        let mut bucket = self.buckets.last().unwrap();
        for b in &self.buckets {
            if cum + b.count as f64 >= target {
                bucket = b;
                break;
            }
            cum += b.count as f64;
        }
        let frac = ((target - cum) / bucket.count as f64).clamp(0.0, 1.0);
        let (lo, hi) = (bucket.lower.as_f64()?, bucket.upper.as_f64()?);
        let candidate = match kind {
            ColumnKind::Decimal => {
                let d = bucket.distinct as f64;
                let t = if d <= 1.0 || hi == lo {
                    1.0
                } else {
                    ((frac - 1.0 / d) * d / (d - 1.0)).clamp(0.0, 1.0)
                };
                return Some(Value::Dec(lo + t * (hi - lo)));
            }
            _ => {
                let width = hi - lo + 1.0;
                (lo + (frac * width).ceil() - 1.0).clamp(lo, hi) as i64
            }
        };
        // pick the nearest of the neighbouring integers
        let wrap = |x: i64| match kind {
            ColumnKind::Date => Value::Date(x as i32),
            _ => Value::Int(x),
        };
        [candidate - 1, candidate, candidate + 1]
            .into_iter()
            .map(wrap)
            .min_by(|a, b| {
                let ea = (self.estimate_le(kind, a) - target).abs();
                let eb = (self.estimate_le(kind, b) - target).abs();
                ea.total_cmp(&eb)
            })
    }

    /// Bucket upper bound whose exact cumulative count is nearest `target`.
    pub fn nearest_boundary(&self, target: f64) -> Option<(Value, u64)> {
        let mut cum = 0;
        let mut best: Option<(Value, u64)> = None;
        for b in &self.buckets {
            cum += b.count;
            let better = best
                .as_ref()
                .is_none_or(|(_, c)| (cum as f64 - target).abs() < (*c as f64 - target).abs());
            if better {
                best = Some((b.upper.clone(), cum));
            }
        }
        best
    }

    /// Mean rows per distinct value within the bucket containing `v`.
    pub fn granularity_at(&self, v: &Value) -> f64 {
        self.buckets
            .iter()
            .find(|b| v.total_cmp(&b.upper).is_le())
            .or(self.buckets.last())
            .map(|b| b.count as f64 / b.distinct.max(1) as f64)
            .unwrap_or(0.0)
    }
}

/// Fraction of a bucket's rows at or below `v`, assuming distinct values
/// spread uniformly between the bounds.
fn within_bucket(kind: ColumnKind, b: &Bucket, v: &Value) -> f64 {
    match (kind, b.lower.as_f64(), b.upper.as_f64(), v.as_f64()) {
        (ColumnKind::Decimal, Some(lo), Some(hi), Some(x)) => {
            if hi <= lo {
                return 1.0;
            }
            let d = b.distinct as f64;
            1.0 / d + (d - 1.0) / d * ((x - lo) / (hi - lo))
        }
        (_, Some(lo), Some(hi), Some(x)) => (x.floor() - lo + 1.0) / (hi - lo + 1.0),
        _ => 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopValue {
    pub value: Value,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub kind: ColumnKind,
    pub row_count: u64,
    pub null_count: u64,
    pub distinct_count: u64,
    pub min: Option<Value>,
    pub max: Option<Value>,
    pub histogram: Histogram,
    /// Most frequent values, by count descending then value ascending.
    pub top_k: Vec<TopValue>,
    pub avg_width_bytes: f64,
    pub is_unique: bool,
}

impl ColumnStats {
    pub fn compute(def: &ColumnDef, values: Vec<Value>, buckets: usize, top_k: usize) -> ColumnStats {
        let row_count = values.len() as u64;
        let mut present: Vec<Value> = values.into_iter().filter(|v| !v.is_null()).collect();
        let null_count = row_count - present.len() as u64;
        present.sort_by(|a, b| a.total_cmp(b));

        let mut runs: Vec<TopValue> = Vec::new();
        for v in &present {
            match runs.last_mut() {
                Some(r) if r.value == *v => r.count += 1,
                _ => runs.push(TopValue {
                    value: v.clone(),
                    count: 1,
                }),
            }
        }
        let distinct_count = runs.len() as u64;
        runs.sort_by_key(|r| std::cmp::Reverse(r.count));
        runs.truncate(top_k);

        let avg_width_bytes = match def.kind {
            ColumnKind::Integer | ColumnKind::Decimal => 8.0,
            ColumnKind::Date => 4.0,
            ColumnKind::String if row_count > 0 => {
                present.iter().map(|v| v.as_str().map_or(0, str::len)).sum::<usize>() as f64 / row_count as f64
            }
            ColumnKind::String => 0.0,
        };

        ColumnStats {
            name: def.name.clone(),
            kind: def.kind,
            row_count,
            null_count,
            distinct_count,
            min: present.first().cloned(),
            max: present.last().cloned(),
            histogram: Histogram::build(&present, buckets),
            top_k: runs,
            avg_width_bytes,
            is_unique: def.unique || (null_count == 0 && distinct_count == row_count && row_count > 0),
        }
    }

    pub fn non_null(&self) -> u64 {
        self.row_count - self.null_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Value> {
        v.iter().map(|&x| Value::Int(x)).collect()
    }

    fn def(kind: ColumnKind) -> ColumnDef {
        ColumnDef {
            name: "x".into(),
            kind,
            unique: false,
        }
    }

    #[test]
    fn tiny_aggregate() {
        let s = ColumnStats::compute(&def(ColumnKind::Integer), ints(&[1, 2, 2, 3]), 64, 50);
        assert_eq!(s.min, Some(Value::Int(1)));
        assert_eq!(s.max, Some(Value::Int(3)));
        assert_eq!(s.distinct_count, 3);
        assert_eq!(s.row_count, 4);
        assert_eq!(s.histogram.total(), 4);
        assert_eq!(
            s.top_k[0],
            TopValue {
                value: Value::Int(2),
                count: 2
            }
        );
        assert!(!s.is_unique);
    }

    #[test]
    fn one_value_per_bucket() {
        let values = ints(&(0..64).collect::<Vec<_>>());
        let h = Histogram::build(&values, 64);
        assert_eq!(h.buckets.len(), 64);
        for (i, b) in h.buckets.iter().enumerate() {
            assert_eq!(
                (b.lower.clone(), b.upper.clone()),
                (Value::Int(i as i64), Value::Int(i as i64))
            );
            assert_eq!(b.count, 1);
        }
    }

    #[test]
    fn duplicates_never_straddle_buckets() {
        let mut v = vec![5; 50];
        v.extend(0..50);
        v.sort();
        let h = Histogram::build(&ints(&v), 10);
        let fives: Vec<_> = h
            .buckets
            .iter()
            .filter(|b| b.lower.total_cmp(&Value::Int(5)).is_le() && b.upper.total_cmp(&Value::Int(5)).is_ge())
            .collect();
        assert_eq!(fives.len(), 1);
        assert_eq!(h.total(), 100);
    }

    #[test]
    fn quantile_of_uniform_integers() {
        let values = ints(&(1..=100).collect::<Vec<_>>());
        let h = Histogram::build(&values, 64);
        let v = h.quantile(ColumnKind::Integer, 0.25).unwrap();
        assert_eq!(v, Value::Int(25));
        assert_eq!(h.estimate_le(ColumnKind::Integer, &Value::Int(100)), 100.0);
        assert_eq!(h.estimate_le(ColumnKind::Integer, &Value::Int(0)), 0.0);
    }

    #[test]
    fn quantile_of_decimals_is_close() {
        let values: Vec<Value> = (0..10_000).map(|i| Value::Dec(i as f64 * 0.37)).collect();
        let h = Histogram::build(&values, 64);
        for s in [0.01, 0.1, 0.5, 0.9] {
            let v = h.quantile(ColumnKind::Decimal, s).unwrap().as_f64().unwrap();
            let actual = values.iter().filter(|x| x.as_f64().unwrap() <= v).count() as f64 / 10_000.0;
            assert!((actual - s).abs() / s < 0.05, "s={s} actual={actual}");
        }
    }

    #[test]
    fn string_boundaries() {
        let values: Vec<Value> = (0..100).map(|i| Value::Str(format!("k{i:03}"))).collect();
        let h = Histogram::build(&values, 10);
        let v = h.quantile(ColumnKind::String, 0.3).unwrap();
        assert_eq!(v, Value::Str("k029".into()));
        assert_eq!(h.nearest_boundary(30.0).unwrap().1, 30);
    }

    #[test]
    fn string_width_and_nulls() {
        let values = vec![Value::Str("ab".into()), Value::Str("abcd".into()), Value::Null];
        let s = ColumnStats::compute(&def(ColumnKind::String), values, 64, 50);
        assert_eq!(s.null_count, 1);
        assert_eq!(s.avg_width_bytes, 2.0);
        assert_eq!(s.histogram.total(), s.row_count - s.null_count);
    }
}
