use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{QueryType, TableId, TraceEntry, TraceError, WorkloadTrace};

/// Names the source columns that supply each trace field.
///
/// Defaults match the canonical trace format, so canonical files parse with
/// `ColumnMapping::default()`. Loaded from a TOML key-value file, e.g.
///
/// ```toml
/// query_type = "query_type"
/// arrival_time = "arrival_timestamp"
/// read_tables = "read_table_ids"
/// write_table = "write_table_ids"
/// runtime = "execution_duration_ms"
/// bytes_read = "mbytes_scanned"
/// query_hash = "feature_fingerprint"
/// bytes_multiplier = 1000000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub query_type: String,
    pub arrival_time: String,
    pub num_joins: String,
    pub read_tables: String,
    pub write_table: String,
    pub runtime: String,
    pub bytes_read: String,
    pub query_hash: String,
    /// Optional aggregate-count column. When unset, a `num_aggregates`
    /// header column is picked up if present.
    pub num_aggregates: Option<String>,
    /// Applied to unsuffixed byte values (e.g. 1e6 for megabyte columns).
    pub bytes_multiplier: f64,
    /// Applied to unsuffixed runtime values (e.g. 1000 for seconds).
    pub runtime_multiplier: f64,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            query_type: "query_type".into(),
            arrival_time: "arrival_ts_ms".into(),
            num_joins: "num_joins".into(),
            read_tables: "read_tables".into(),
            write_table: "write_table".into(),
            runtime: "runtime_ms".into(),
            bytes_read: "bytes_read".into(),
            query_hash: "query_hash".into(),
            num_aggregates: None,
            bytes_multiplier: 1.0,
            runtime_multiplier: 1.0,
            delimiter: ',',
        }
    }
}

impl ColumnMapping {
    pub fn from_toml(text: &str) -> Result<Self, TraceError> {
        toml::from_str(text).map_err(|e| TraceError::InvalidMapping(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Any malformed row aborts parsing.
    #[default]
    Strict,
    /// Malformed rows are dropped and counted.
    Lenient,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub mapping: ColumnMapping,
    pub mode: ParseMode,
}

#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub trace: WorkloadTrace,
    /// `(line, reason)` for every row dropped in lenient mode.
    pub dropped: Vec<(usize, String)>,
}

pub fn parse_trace_file(path: &Path, options: &ParseOptions) -> Result<ParsedTrace, TraceError> {
    parse_trace(File::open(path)?, options)
}

struct ColumnIndex {
    query_type: usize,
    arrival: usize,
    num_joins: usize,
    read_tables: usize,
    write_table: usize,
    runtime: usize,
    bytes_read: usize,
    query_hash: usize,
    num_aggregates: Option<usize>,
}

pub fn parse_trace<R: Read>(source: R, options: &ParseOptions) -> Result<ParsedTrace, TraceError> {
    let mapping = &options.mapping;
    if !mapping.delimiter.is_ascii() {
        return Err(TraceError::InvalidMapping("delimiter must be ASCII".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(TraceError::EmptyTrace);
    }
    let find = |name: &str| -> Result<usize, TraceError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TraceError::MissingColumn {
                column: name.to_string(),
            })
    };
    let idx = ColumnIndex {
        query_type: find(&mapping.query_type)?,
        arrival: find(&mapping.arrival_time)?,
        num_joins: find(&mapping.num_joins)?,
        read_tables: find(&mapping.read_tables)?,
        write_table: find(&mapping.write_table)?,
        runtime: find(&mapping.runtime)?,
        bytes_read: find(&mapping.bytes_read)?,
        query_hash: find(&mapping.query_hash)?,
        num_aggregates: match &mapping.num_aggregates {
            Some(name) => Some(find(name)?),
            None => header.iter().position(|h| h == "num_aggregates"),
        },
    };

    let mut entries = Vec::new();
    let mut dropped = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        // header is line 1
        let line = row_no + 2;
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|r| parse_row(&r, &idx, mapping));
        match parsed {
            Ok(entry) => entries.push(entry),
            Err(reason) => match options.mode {
                ParseMode::Strict => return Err(TraceError::MalformedRow { line, reason }),
                ParseMode::Lenient => {
                    log::warn!("dropping trace line {line}: {reason}");
                    dropped.push((line, reason));
                }
            },
        }
    }
    if entries.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    Ok(ParsedTrace {
        trace: WorkloadTrace::sort_and_index(entries),
        dropped,
    })
}

fn parse_row(record: &csv::StringRecord, idx: &ColumnIndex, mapping: &ColumnMapping) -> Result<TraceEntry, String> {
    let field = |i: usize| -> Result<&str, String> {
        record
            .get(i)
            .ok_or_else(|| format!("row has {} fields, expected at least {}", record.len(), i + 1))
    };
    let query_type: QueryType = field(idx.query_type)?.parse()?;
    let arrival_ms = parse_timestamp_ms(field(idx.arrival)?)?;
    let num_joins = parse_count(field(idx.num_joins)?).map_err(|e| format!("num_joins: {e}"))?;
    let read_tables = parse_table_set(field(idx.read_tables)?)?;
    let writes = parse_table_set(field(idx.write_table)?)?;
    if writes.len() > 1 {
        return Err("multiple write tables are not supported".into());
    }
    let write_table = writes.into_iter().next();
    let runtime_ms = parse_duration_ms(field(idx.runtime)?, mapping.runtime_multiplier)?;
    let bytes_read = parse_bytes(field(idx.bytes_read)?, mapping.bytes_multiplier)?;
    let query_hash = field(idx.query_hash)?.to_string();
    if query_hash.is_empty() && query_type == QueryType::Select {
        return Err("select entry without query hash".into());
    }
    let num_aggregates = match idx.num_aggregates {
        Some(i) => {
            let raw = field(i)?;
            if is_null(raw) {
                None
            } else {
                Some(parse_count(raw).map_err(|e| format!("num_aggregates: {e}"))?)
            }
        }
        None => None,
    };
    let entry = TraceEntry {
        entry_id: 0,
        query_type,
        arrival_ms,
        num_joins,
        read_tables,
        write_table,
        runtime_ms,
        bytes_read,
        query_hash,
        num_aggregates,
    };
    entry.check_invariants()?;
    Ok(entry)
}

fn is_null(s: &str) -> bool {
    matches!(
        s.trim(),
        "" | "-" | "\\N" | "null" | "NULL" | "None" | "none" | "NaN" | "nan"
    )
}

fn parse_count(s: &str) -> Result<u32, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u32>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= u32::MAX as f64 => Ok(f as u32),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

/// Accepts `"0|1"`, `"{0,1}"`, `"[0, 1]"`, `"0,1"` or a null marker.
pub(crate) fn parse_table_set(s: &str) -> Result<BTreeSet<TableId>, String> {
    let s = s.trim();
    if is_null(s) {
        return Ok(BTreeSet::new());
    }
    let inner = s.trim_matches(|c| matches!(c, '{' | '}' | '[' | ']' | '(' | ')' | '"'));
    inner
        .split(|c: char| c == '|' || c == ',' || c == ';' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| {
            parse_count(p)
                .map(TableId)
                .map_err(|_| format!("invalid table id `{p}`"))
        })
        .collect()
}

fn split_number_suffix(s: &str) -> (&str, &str) {
    let s = s.trim();
    let cut = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
        .unwrap_or(s.len());
    let (num, rest) = s.split_at(cut);
    (num.trim(), rest.trim())
}

fn non_negative(value: f64, what: &str) -> Result<u64, String> {
    if !value.is_finite() || value < 0.0 {
        return Err(format!("{what} must be a non-negative number"));
    }
    Ok(value.round() as u64)
}

/// `"9M"`, `"9 M"`, `"4K"`, `"1.5G"` (decimal multipliers) or a plain number
/// scaled by `multiplier`.
pub(crate) fn parse_bytes(s: &str, multiplier: f64) -> Result<u64, String> {
    let (num, suffix) = split_number_suffix(s);
    let value: f64 = num.parse().map_err(|_| format!("invalid byte count `{s}`"))?;
    let scale = match suffix.to_ascii_uppercase().as_str() {
        "" => multiplier,
        "B" => 1.0,
        "K" | "KB" => 1e3,
        "M" | "MB" => 1e6,
        "G" | "GB" => 1e9,
        "T" | "TB" => 1e12,
        _ => return Err(format!("unknown byte suffix in `{s}`")),
    };
    non_negative(value * scale, "bytes_read")
}

/// `"820ms"`, `"1.5s"`, `"2min"` or a plain number scaled by `multiplier`.
pub(crate) fn parse_duration_ms(s: &str, multiplier: f64) -> Result<u64, String> {
    let (num, suffix) = split_number_suffix(s);
    let value: f64 = num.parse().map_err(|_| format!("invalid runtime `{s}`"))?;
    let scale = match suffix.to_ascii_lowercase().as_str() {
        "" => multiplier,
        "ms" => 1.0,
        "s" | "sec" => 1e3,
        "us" => 1e-3,
        "min" | "m" => 60e3,
        _ => return Err(format!("unknown duration suffix in `{s}`")),
    };
    non_negative(value * scale, "runtime")
}

/// Integer milliseconds, a datetime (`2024-03-01 10:00:00.123`, RFC 3339),
/// a clock time (`16:05`, `16:05:30`) or an hour like `4pm`. Clock forms are
/// milliseconds since midnight.
pub(crate) fn parse_timestamp_ms(s: &str) -> Result<i64, String> {
    let s = s.trim();
    if let Ok(ms) = s.parse::<i64>() {
        return Ok(ms);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp_millis());
        }
    }
    // datetimes with a trailing offset such as `+00` or `+00:00`
    if let Some(pos) = s.rfind(['+', 'Z']) {
        if pos > 10 {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s[..pos].trim(), "%Y-%m-%d %H:%M:%S%.f") {
                return Ok(dt.and_utc().timestamp_millis());
            }
        }
    }
    let lower = s.to_ascii_lowercase();
    for (suffix, offset) in [("am", 0), ("pm", 12)] {
        if let Some(h) = lower.strip_suffix(suffix) {
            let hour: i64 = h.trim().parse().map_err(|_| format!("invalid time `{s}`"))?;
            if !(1..=12).contains(&hour) {
                return Err(format!("invalid hour in `{s}`"));
            }
            return Ok(((hour % 12) + offset) * 3_600_000);
        }
    }
    let parts: Vec<&str> = s.split(':').collect();
    if (2..=3).contains(&parts.len()) {
        let mut ms = 0i64;
        for (i, p) in parts.iter().enumerate() {
            let v: f64 = p.parse().map_err(|_| format!("invalid time `{s}`"))?;
            ms += (v * [3_600_000.0, 60_000.0, 1_000.0][i]) as i64;
        }
        return Ok(ms);
    }
    Err(format!("unrecognized timestamp `{s}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ROWS: &str = "\
entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash
0,select,4pm,1,\"{0,1}\",-,820ms,9M,a62e
1,insert,6pm,1,\"{0,3}\",1,420ms,4M,73b9
2,select,7pm,1,\"{0,1}\",-,750ms,10M,a62e
3,select,9pm,0,1,-,200ms,78M,962c
";

    fn parse(text: &str) -> Result<ParsedTrace, TraceError> {
        parse_trace(text.as_bytes(), &ParseOptions::default())
    }

    #[test]
    fn four_rows_first_row() {
        let trace = parse(FOUR_ROWS).unwrap().trace;
        let e = &trace.entries()[0];
        assert_eq!(e.entry_id, 0);
        assert_eq!(e.query_type, QueryType::Select);
        assert_eq!(e.arrival_ms, 16 * 3_600_000);
        assert_eq!(e.num_joins, 1);
        assert_eq!(e.read_tables, [TableId(0), TableId(1)].into_iter().collect());
        assert_eq!(e.write_table, None);
        assert_eq!(e.runtime_ms, 820);
        assert_eq!(e.bytes_read, 9_000_000);
        assert_eq!(e.query_hash, "a62e");
    }

    #[test]
    fn four_rows_type_counts() {
        let trace = parse(FOUR_ROWS).unwrap().trace;
        let selects = trace.selects().count();
        let inserts = trace
            .entries()
            .iter()
            .filter(|e| e.query_type == QueryType::Insert)
            .count();
        assert_eq!((selects, inserts), (3, 1));
        assert_eq!(trace.entries()[1].write_table, Some(TableId(1)));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse(""), Err(TraceError::EmptyTrace)));
        let header_only =
            "entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash\n";
        assert!(matches!(parse(header_only), Err(TraceError::EmptyTrace)));
    }

    #[test]
    fn reorders_swapped_timestamps() {
        let text = "\
query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash
select,2000,0,1,,5,5,b
select,1000,0,1,,5,5,a
";
        let trace = parse(text).unwrap().trace;
        assert_eq!(trace.entries()[0].query_hash, "a");
        assert_eq!(trace.entries()[0].arrival_ms, 1000);
    }

    #[test]
    fn missing_column() {
        let text = "query_type,arrival_ts_ms\nselect,1\n";
        match parse(text) {
            Err(TraceError::MissingColumn { column }) => assert_eq!(column, "num_joins"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_rejects_and_lenient_drops() {
        let text = "\
query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash
select,1000,0,1,,5,5,a
select,soon,0,1,,5,5,b
insert,3000,0,1,,5,5,c
";
        assert!(matches!(parse(text), Err(TraceError::MalformedRow { line: 3, .. })));
        let lenient = ParseOptions {
            mode: ParseMode::Lenient,
            ..Default::default()
        };
        let parsed = parse_trace(text.as_bytes(), &lenient).unwrap();
        assert_eq!(parsed.trace.len(), 1);
        assert_eq!(parsed.dropped.iter().map(|d| d.0).collect::<Vec<_>>(), [3, 4]);
    }

    #[test]
    fn mapped_columns_and_units() {
        let text = "\
feature_fingerprint,query_type,arrival_timestamp,num_joins,read_table_ids,write_table_ids,execution_duration_ms,mbytes_scanned
h1,select,2024-03-01 10:00:00.250,2,\"3,4\",,12,1.5
h2,ctas,2024-03-01 10:00:01,0,,9,3,0
";
        let mapping = ColumnMapping::from_toml(
            r#"
arrival_time = "arrival_timestamp"
read_tables = "read_table_ids"
write_table = "write_table_ids"
runtime = "execution_duration_ms"
bytes_read = "mbytes_scanned"
query_hash = "feature_fingerprint"
bytes_multiplier = 1000000
"#,
        )
        .unwrap();
        let opts = ParseOptions {
            mapping,
            mode: ParseMode::Strict,
        };
        let trace = parse_trace(text.as_bytes(), &opts).unwrap().trace;
        let e = &trace.entries()[0];
        assert_eq!(e.bytes_read, 1_500_000);
        assert_eq!(e.read_tables.len(), 2);
        assert_eq!(trace.entries()[1].query_type, QueryType::Other);
        assert_eq!(trace.entries()[1].write_table, Some(TableId(9)));
        assert_eq!(trace.entries()[1].arrival_ms - e.arrival_ms, 750);
    }

    #[test]
    fn value_syntaxes() {
        assert_eq!(parse_bytes("9 M", 1.0), Ok(9_000_000));
        assert_eq!(parse_bytes("4K", 1.0), Ok(4_000));
        assert_eq!(parse_bytes("12", 1.0), Ok(12));
        assert!(parse_bytes("-3", 1.0).is_err());
        assert_eq!(parse_duration_ms("1.5s", 1.0), Ok(1_500));
        assert_eq!(parse_timestamp_ms("12am"), Ok(0));
        assert_eq!(parse_timestamp_ms("12pm"), Ok(12 * 3_600_000));
        assert_eq!(parse_timestamp_ms("16:30"), Ok(16 * 3_600_000 + 30 * 60_000));
        assert!(parse_timestamp_ms("13pm").is_err());
        assert_eq!(parse_table_set("[0, 1]").unwrap().len(), 2);
        assert!(parse_table_set("-").unwrap().is_empty());
    }

    #[test]
    fn rejects_multi_table_writes() {
        let text = "\
query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash
insert,1,0,1,1|2,5,5,a
";
        assert!(matches!(parse(text), Err(TraceError::MalformedRow { .. })));
    }
}
