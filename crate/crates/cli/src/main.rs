use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tracesynth::backend::SqliteBackend;
use tracesynth::cache_sim::{sweep, write_sweep_csv, CacheKey, CachePolicy, HitCost, SimError, SimQuery};
use tracesynth::catalog::{analyze_schema, AnalyzeOptions, CsvDirectory, SchemaCatalog, SchemaDef};
use tracesynth::features::{annotate_repetitions, estimate_table_scan_sizes, temporal_profile};
use tracesynth::generation::ByteTargeting;
use tracesynth::matching::{load_query_pool, QueryPool};
use tracesynth::pipeline::{staging_plan, synthesize, PipelineError, SynthConfig, SynthInputs};
use tracesynth::trace::{parse_trace_file, ColumnMapping, ParseMode, ParseOptions, TraceError};
use tracesynth::workload::{compress_idle_gaps, read_workload_file, write_workload_file};
use tracesynth::{SynthesisMode, WorkloadTrace};

const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;
const EXIT_SYNTH: u8 = 4;
const EXIT_SIM: u8 = 5;

/// Synthesize replayable SQL workloads from anonymized query traces.
///
/// Exit codes: 0 ok, 2 usage or input error, 3 empty trace, 4 synthesis
/// failure, 5 simulation failure.
#[derive(Parser)]
#[command(name = "tracesynth", version)]
struct Cli {
    /// More diagnostics on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repetition metrics, temporal profile and table size estimates of a trace.
    Analyze(AnalyzeArgs),
    /// Synthesize a workload from a trace.
    Synth(SynthArgs),
    /// Round-robin control workload (same as `synth --mode baseline`).
    Baseline(SynthArgs),
    /// Clamp idle gaps of a workload.
    Compress(CompressArgs),
    /// Replay a workload (or the trace itself) through result-cache policies.
    Simulate(SimulateArgs),
    /// Print the statements that materialize staging tables.
    Staging(StagingArgs),
}

#[derive(Args)]
struct TraceArgs {
    /// Trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// TOML column mapping for traces with other column names.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Drop malformed rows instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// Temporal histogram bucket width.
    #[arg(long, default_value_t = 60_000)]
    bucket_ms: i64,
    /// Write the temporal profile CSV here.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Schema directory; when given, its statistics are written to `--catalog-out`.
    #[arg(long, requires = "catalog_out")]
    schema: Option<PathBuf>,
    #[arg(long)]
    catalog_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Targeting {
    Absolute,
    Relative,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<SynthesisMode>,
    #[command(flatten)]
    trace: TraceArgs,
    /// Directory holding schema.json and one CSV per table.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Directory of *.sql pool queries (matching and baseline).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Workload JSONL output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Synthesis report JSON output.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    buckets: Option<usize>,
    #[arg(long)]
    instantiation_budget: Option<usize>,
    /// Rows touched per synthesized write, as a fraction of the table.
    #[arg(long)]
    dml_row_fraction: Option<f64>,
    #[arg(long)]
    byte_targeting: Option<Targeting>,
    /// Skip the non-empty probe of generated selects.
    #[arg(long)]
    no_validate: bool,
    /// Compress idle gaps of the output to at most this many milliseconds.
    #[arg(long)]
    max_gap_ms: Option<i64>,
    /// Copy only staging rows whose key is divisible by this.
    #[arg(long)]
    sample_modulus: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct RunConfig {
    mode: Option<SynthesisMode>,
    trace: Option<PathBuf>,
    mapping: Option<PathBuf>,
    schema: Option<PathBuf>,
    pool: Option<PathBuf>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    seed: Option<u64>,
    buckets: Option<usize>,
    instantiation_budget: Option<usize>,
    dml_row_fraction: Option<f64>,
    byte_targeting: Option<Targeting>,
    validate: Option<bool>,
    max_gap_ms: Option<i64>,
    sample_modulus: Option<u64>,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    max_gap_ms: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeyArg {
    Text,
    Hash,
    Scanset,
}

#[derive(Args)]
struct SimulateArgs {
    /// Workload JSONL; the trace itself is replayed when omitted.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Source trace supplying runtimes.
    #[command(flatten)]
    trace: TraceArgs,
    /// Cache keys to compare; all three by default.
    #[arg(long = "key", value_enum)]
    keys: Vec<KeyArg>,
    /// Cost of a hit in ms, or `runtime` for a cache that saves nothing.
    #[arg(long, default_value = "1")]
    hit_cost: String,
    /// Cache entry limit with LRU eviction.
    #[arg(long)]
    capacity: Option<usize>,
    /// Write the report CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StagingArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    sample_modulus: Option<u64>,
    #[arg(long, default_value_t = tracesynth::catalog::DEFAULT_BUCKETS)]
    buckets: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure::new(EXIT_INPUT, message)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a, None),
        Command::Baseline(a) => synth(a, Some(SynthesisMode::Baseline)),
        Command::Compress(a) => compress(a),
        Command::Simulate(a) => simulate(a),
        Command::Staging(a) => staging(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_trace(path: Option<&Path>, mapping: Option<&Path>, lenient: bool) -> CliResult<WorkloadTrace> {
    let path = path.ok_or_else(|| Failure::input("--trace is required"))?;
    let mapping = match mapping {
        Some(m) => {
            let text = fs::read_to_string(m).map_err(|e| Failure::input(format!("{}: {e}", m.display())))?;
            ColumnMapping::from_toml(&text).map_err(|e| Failure::input(format!("{}: {e}", m.display())))?
        }
        None => ColumnMapping::default(),
    };
    let options = ParseOptions {
        mapping,
        mode: if lenient { ParseMode::Lenient } else { ParseMode::Strict },
    };
    let parsed = parse_trace_file(path, &options).map_err(|e| match e {
        TraceError::EmptyTrace => Failure::new(EXIT_EMPTY, format!("{}: trace is empty", path.display())),
        other => Failure::input(format!("{}: {other}", path.display())),
    })?;
    for (line, reason) in &parsed.dropped {
        log::warn!("{}:{line}: dropped row: {reason}", path.display());
    }
    if parsed.trace.is_empty() {
        return Err(Failure::new(EXIT_EMPTY, format!("{}: trace is empty", path.display())));
    }
    Ok(parsed.trace)
}

fn load_schema(dir: &Path, buckets: usize) -> CliResult<(SchemaDef, CsvDirectory, SchemaCatalog)> {
    let data = CsvDirectory::new(dir);
    let schema = data
        .load_schema()
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let options = AnalyzeOptions {
        buckets,
        ..AnalyzeOptions::default()
    };
    let catalog = analyze_schema(&schema, &data, options).map_err(|e| Failure::input(e.to_string()))?;
    Ok((schema, data, catalog))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeOutput {
    entries: usize,
    selects: usize,
    qrr: f64,
    srr: f64,
    qrr_dml: f64,
    srr_dml: f64,
    full_repetitions: usize,
    scanset_repetitions: usize,
    full_repetitions_dml: usize,
    scanset_repetitions_dml: usize,
    read_write_ratio: Option<f64>,
    max_gap_ms: i64,
    tables: Vec<tracesynth::features::TableScanEstimate>,
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let trace = load_trace(
        args.trace.trace.as_deref(),
        args.trace.mapping.as_deref(),
        args.trace.lenient,
    )?;
    let rep = annotate_repetitions(&trace).map_err(|e| Failure::new(EXIT_EMPTY, e.to_string()))?;
    let profile = temporal_profile(&trace, args.bucket_ms).map_err(|e| Failure::input(e.to_string()))?;
    let scans = estimate_table_scan_sizes(&trace);
    if let Some(path) = &args.profile {
        let mut buf = Vec::new();
        profile.write_csv(&mut buf).map_err(|e| Failure::input(e.to_string()))?;
        write_file(path, &buf)?;
    }
    if let (Some(dir), Some(out)) = (&args.schema, &args.catalog_out) {
        let (_, _, catalog) = load_schema(dir, tracesynth::catalog::DEFAULT_BUCKETS)?;
        catalog.save_json(out).map_err(|e| Failure::input(e.to_string()))?;
    }
    let out = AnalyzeOutput {
        entries: trace.len(),
        selects: rep.select_count,
        qrr: rep.qrr,
        srr: rep.srr,
        qrr_dml: rep.qrr_dml,
        srr_dml: rep.srr_dml,
        full_repetitions: rep.full_repetitions,
        scanset_repetitions: rep.scanset_repetitions,
        full_repetitions_dml: rep.full_repetitions_dml,
        scanset_repetitions_dml: rep.scanset_repetitions_dml,
        read_write_ratio: profile.read_write_ratio,
        max_gap_ms: profile.max_gap_ms().unwrap_or(0),
        tables: scans.tables.into_values().collect(),
    };
    if args.json {
        return print_json(&out);
    }
    println!("entries {}", out.entries);
    println!("selects {}", out.selects);
    println!("qrr {:.3}", out.qrr);
    println!("srr {:.3}", out.srr);
    println!("qrr_dml {:.3}", out.qrr_dml);
    println!("srr_dml {:.3}", out.srr_dml);
    match out.read_write_ratio {
        Some(r) => println!("read_write_ratio {r:.3}"),
        None => println!("read_write_ratio inf"),
    }
    println!("max_gap_ms {}", out.max_gap_ms);
    for t in &out.tables {
        println!(
            "table {} max_single_scan_bytes {} estimated {} accesses {}",
            t.table.0, t.max_single_table_scan_bytes, t.estimated, t.access_count
        );
    }
    Ok(())
}

fn synth(args: SynthArgs, forced: Option<SynthesisMode>) -> CliResult {
    let file: RunConfig = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let mode = forced
        .or(args.mode)
        .or(file.mode)
        .ok_or_else(|| Failure::input("--mode is required"))?;
    let seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| Failure::input("--seed is required"))?;
    let schema_dir = args
        .schema
        .or(file.schema)
        .ok_or_else(|| Failure::input(format!("{mode} synthesis requires --schema")))?;
    let out = args
        .out
        .or(file.out)
        .ok_or_else(|| Failure::input("--out is required"))?;
    let pool_dir = args.pool.or(file.pool);
    if mode != SynthesisMode::Generation && pool_dir.is_none() {
        return Err(Failure::input(format!("{mode} synthesis requires --pool")));
    }
    let trace_path = args.trace.trace.or(file.trace);
    let mapping = args.trace.mapping.or(file.mapping);
    let trace = load_trace(trace_path.as_deref(), mapping.as_deref(), args.trace.lenient)?;
    let buckets = args
        .buckets
        .or(file.buckets)
        .unwrap_or(tracesynth::catalog::DEFAULT_BUCKETS);
    let (schema, data, catalog) = load_schema(&schema_dir, buckets)?;
    let pool: Option<QueryPool> = match &pool_dir {
        Some(dir) => Some(load_query_pool(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?),
        None => None,
    };

    let mut config = SynthConfig {
        mode,
        seed,
        ..SynthConfig::default()
    };
    if let Some(b) = args.instantiation_budget.or(file.instantiation_budget) {
        config.instantiation_budget = b;
    }
    if let Some(f) = args.dml_row_fraction.or(file.dml_row_fraction) {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Failure::input("--dml-row-fraction must lie in (0, 1]"));
        }
        config.generation.dml_row_fraction = f;
    }
    if let Some(t) = args.byte_targeting.or(file.byte_targeting) {
        config.generation.byte_targeting = match t {
            Targeting::Absolute => ByteTargeting::Absolute,
            Targeting::Relative => ByteTargeting::RelativeToTraceMax,
        };
    }
    config.staging.sample_modulus = args.sample_modulus.or(file.sample_modulus);
    let validate = !args.no_validate && file.validate.unwrap_or(true);

    let mut backend = if mode == SynthesisMode::Generation && validate {
        let mut b = SqliteBackend::load(&schema, &data).map_err(|e| Failure::new(EXIT_SYNTH, e.to_string()))?;
        b.apply_staging(&staging_plan(&catalog, &config), &catalog)
            .map_err(|e| Failure::new(EXIT_SYNTH, e.to_string()))?;
        Some(b)
    } else {
        None
    };
    let inputs = SynthInputs {
        trace: &trace,
        catalog: &catalog,
        pool: pool.as_ref(),
        backend: backend
            .as_mut()
            .map(|b| b as &mut dyn tracesynth::backend::ExecutionBackend),
    };
    let (mut workload, report) = synthesize(&config, inputs).map_err(|e| match e {
        PipelineError::EmptyTrace => Failure::new(EXIT_EMPTY, e.to_string()),
        PipelineError::MissingPool { .. } | PipelineError::Pool(_) => Failure::input(e.to_string()),
        other => Failure::new(EXIT_SYNTH, other.to_string()),
    })?;
    if let Some(gap) = args.max_gap_ms.or(file.max_gap_ms) {
        workload = compress_idle_gaps(&workload, gap).map_err(|e| Failure::input(e.to_string()))?;
    }
    write_workload_file(&workload, &out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    if let Some(path) = args.report.or(file.report) {
        let text = serde_json::to_vec_pretty(&report).map_err(|e| Failure::input(e.to_string()))?;
        write_file(&path, &text)?;
    }
    if args.json {
        return print_json(&report);
    }
    println!("mode {}", report.mode);
    println!("emitted {}", report.emitted);
    println!("skipped_other {}", report.skipped_other);
    println!(
        "qrr trace {:.3} workload {:.3} delta {:+.3}",
        report.trace_repetition.qrr, report.workload_repetition.qrr, report.repetition_delta.qrr
    );
    println!(
        "qrr_dml trace {:.3} workload {:.3} delta {:+.3}",
        report.trace_repetition.qrr_dml, report.workload_repetition.qrr_dml, report.repetition_delta.qrr_dml
    );
    println!("shortfall {}", report.shortfall_count);
    for (flag, n) in &report.flag_counts {
        println!(
            "flag {} {n}",
            serde_json::to_value(flag).unwrap().as_str().unwrap_or("?")
        );
    }
    Ok(())
}

fn compress(args: CompressArgs) -> CliResult {
    let w =
        read_workload_file(&args.workload).map_err(|e| Failure::input(format!("{}: {e}", args.workload.display())))?;
    let out = compress_idle_gaps(&w, args.max_gap_ms).map_err(|e| Failure::input(e.to_string()))?;
    write_workload_file(&out, &args.out).map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))
}

#[derive(Serialize)]
struct PolicySummary<'a> {
    policy: &'a str,
    total_ms_nocache: f64,
    total_ms_cache: f64,
    speedup: f64,
    select_speedup: f64,
    hits: usize,
    invalidations: usize,
}

fn simulate(args: SimulateArgs) -> CliResult {
    let trace = load_trace(
        args.trace.trace.as_deref(),
        args.trace.mapping.as_deref(),
        args.trace.lenient,
    )?;
    let (queries, mode) = match &args.workload {
        Some(p) => {
            let w = read_workload_file(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            let q = SimQuery::from_workload(&w, &trace).map_err(|e| Failure::new(EXIT_SIM, e.to_string()))?;
            (q, Some(w.metadata.mode))
        }
        None => (SimQuery::from_trace(&trace), None),
    };
    let hit_cost = match args.hit_cost.as_str() {
        "runtime" => HitCost::Runtime,
        v => HitCost::Fixed(
            v.parse::<f64>()
                .ok()
                .filter(|c| *c >= 0.0)
                .ok_or_else(|| Failure::input(format!("bad --hit-cost `{v}`")))?,
        ),
    };
    let keys = if args.keys.is_empty() {
        vec![KeyArg::Text, KeyArg::Hash, KeyArg::Scanset]
    } else {
        args.keys.clone()
    };
    let policies: Vec<CachePolicy> = keys
        .iter()
        .map(|k| {
            let (name, key) = match k {
                KeyArg::Text => ("text", CacheKey::SqlText),
                KeyArg::Hash => ("hash", CacheKey::QueryHash),
                KeyArg::Scanset => ("scanset", CacheKey::Scanset),
            };
            CachePolicy {
                name: name.into(),
                key,
                hit_cost,
                capacity: args.capacity,
            }
        })
        .collect();
    let reports = sweep(&queries, &policies).map_err(|e: SimError| Failure::new(EXIT_SIM, e.to_string()))?;
    if mode == Some(SynthesisMode::Baseline) {
        for r in &reports {
            let verdict = if r.speedup <= 1.08 { "within" } else { "outside" };
            eprintln!(
                "note: baseline {} speedup {:.4} is {verdict} the <= 1.08 band",
                r.policy, r.speedup
            );
        }
    }
    if args.json {
        let rows: Vec<PolicySummary> = reports
            .iter()
            .map(|r| PolicySummary {
                policy: &r.policy,
                total_ms_nocache: r.total_runtime_nocache_ms,
                total_ms_cache: r.total_runtime_cache_ms,
                speedup: r.speedup,
                select_speedup: r.select_speedup,
                hits: r.hit_count,
                invalidations: r.invalidation_count,
            })
            .collect();
        return print_json(&rows);
    }
    let mut buf = Vec::new();
    write_sweep_csv(&reports, &mut buf).map_err(|e| Failure::new(EXIT_SIM, e.to_string()))?;
    match &args.csv {
        Some(p) => write_file(p, &buf),
        None => io::stdout().write_all(&buf).map_err(|e| Failure::input(e.to_string())),
    }
}

fn staging(args: StagingArgs) -> CliResult {
    let (_, _, catalog) = load_schema(&args.schema, args.buckets)?;
    let mut config = SynthConfig::default();
    config.staging.sample_modulus = args.sample_modulus;
    let plan = staging_plan(&catalog, &config);
    for (table, why) in &plan.excluded {
        eprintln!("note: {table} not staged ({why:?})");
    }
    for stmt in plan.script(&catalog) {
        println!("{stmt};");
    }
    Ok(())
}
