use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracesynth"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let (trace, schema, pool) = (fx("mini_trace.csv"), fx("imdb_mini"), fx("pool"));
    let out_s = out.display().to_string();
    let mut args = vec![
        "synth", "--trace", &trace, "--schema", &schema, "--pool", &pool, "--out", &out_s,
    ];
    if !extra.contains(&"--seed") {
        args.extend(["--seed", "5"]);
    }
    args.extend(extra);
    ok(&args);
    std::fs::read(out).unwrap()
}

#[test]
fn analyze_json_on_small_fixture() {
    let v: Value = serde_json::from_str(&ok(&["analyze", "--trace", &fx("four_rows.csv"), "--json"])).unwrap();
    assert_eq!(v["entries"], 4);
    assert_eq!(v["selects"], 3);
    assert!((v["qrr"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["qrr_dml"].as_f64(), Some(0.0));
}

#[test]
fn analyze_text_output() {
    let text = ok(&["analyze", "--trace", &fx("rrwrr.csv")]);
    assert!(text.contains("qrr 0.750"), "{text}");
    assert!(text.contains("qrr_dml 0.500"), "{text}");
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(code(&["analyze", "--trace", "/nonexistent/trace.csv"]), 2);
    assert_eq!(code(&["synth", "--mode", "generation", "--trace", &fx("rrwrr.csv")]), 2);
    assert_eq!(
        code(&[
            "synth",
            "--mode",
            "matching",
            "--trace",
            &fx("rrwrr.csv"),
            "--schema",
            &fx("imdb_mini")
        ]),
        2
    );
    assert_eq!(code(&["bogus"]), 2);
}

#[test]
fn empty_trace_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(
        &path,
        "entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash\n",
    )
    .unwrap();
    let out = run(&["analyze", "--trace", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn synth_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["matching", "generation"] {
        let a = synth(dir.path(), "a.jsonl", &["--mode", mode, "--no-validate"]);
        let b = synth(dir.path(), "b.jsonl", &["--mode", mode, "--no-validate"]);
        assert!(a == b, "{mode} differs");
    }
    let a = synth(dir.path(), "s5.jsonl", &["--mode", "generation", "--no-validate"]);
    let c = synth(
        dir.path(),
        "s6.jsonl",
        &["--mode", "generation", "--no-validate", "--seed", "6"],
    );
    assert_ne!(a, c);
}

#[test]
fn baseline_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = synth(dir.path(), "base.jsonl", &["--mode", "baseline"]);
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["mode"], "baseline");
    let mut n = 0;
    for line in lines {
        let q: Value = serde_json::from_str(line).unwrap();
        assert_eq!(q["provenance"], "baseline", "{line}");
        n += 1;
    }
    assert_eq!(n, 1000);
}

#[test]
fn simulate_hit_cost() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "m.jsonl", &["--mode", "matching"]);
    let w = dir.path().join("m.jsonl").display().to_string();
    let trace = fx("mini_trace.csv");
    let sim = |cost: &str| -> Value {
        serde_json::from_str(&ok(&[
            "simulate",
            "--workload",
            &w,
            "--trace",
            &trace,
            "--key",
            "text",
            "--hit-cost",
            cost,
            "--json",
        ]))
        .unwrap()
    };
    let free = sim("0");
    let one = sim("1");
    let neutral = sim("runtime");
    let s = |v: &Value| v[0]["speedup"].as_f64().unwrap();
    assert_eq!(free[0]["hits"], one[0]["hits"]);
    assert!(s(&free) > s(&one) && s(&one) > 1.0);
    assert!((s(&neutral) - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_trace_only() {
    let v: Value = serde_json::from_str(&ok(&["simulate", "--trace", &fx("four_rows.csv"), "--json"])).unwrap();
    for row in v.as_array().unwrap() {
        if row["policy"] != "scanset" {
            assert_eq!(row["hits"], 0, "{row}");
        }
    }
    assert_eq!(
        code(&["simulate", "--trace", &fx("four_rows.csv"), "--hit-cost", "cheap"]),
        2
    );
}

#[test]
fn compress_clamps_gaps() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "g.jsonl", &["--mode", "baseline"]);
    let src = dir.path().join("g.jsonl").display().to_string();
    let out = dir.path().join("c.jsonl").display().to_string();
    ok(&["compress", "--workload", &src, "--max-gap-ms", "1000", "--out", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    let times: Vec<i64> = text
        .lines()
        .skip(1)
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["arrival_ts_ms"]
                .as_i64()
                .unwrap()
        })
        .collect();
    assert_eq!(times.len(), 1000);
    assert!(times.windows(2).all(|p| (0..=1000).contains(&(p[1] - p[0]))));
}

#[test]
fn staging_script() {
    let text = ok(&["staging", "--schema", &fx("imdb_mini")]);
    assert!(text.contains("CREATE TABLE title_staging"));
    assert!(text.lines().all(|l| l.ends_with(';')));
}

#[test]
fn no_repetition_means_no_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(
        &path,
        "entry_id,query_type,arrival_ts_ms,num_joins,read_tables,write_table,runtime_ms,bytes_read,query_hash\n\
         0,select,1,0,0,,50,10,a\n1,select,2,0,1,,70,10,b\n",
    )
    .unwrap();
    let v: Value = serde_json::from_str(&ok(&["simulate", "--trace", path.to_str().unwrap(), "--json"])).unwrap();
    for row in v.as_array().unwrap() {
        assert_eq!(row["speedup"].as_f64(), Some(1.0), "{row}");
    }
}
