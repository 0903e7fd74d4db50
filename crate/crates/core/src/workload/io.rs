use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SynthesisMode, SynthesizedQuery, Workload, WorkloadError, WorkloadMetadata};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    tracesynth_workload: u32,
    mode: SynthesisMode,
    seed: u64,
    trace_fingerprint: String,
    config_digest: String,
    query_count: usize,
}

/// Header line, then one JSON object per query.
pub fn emit_workload<W: Write>(workload: &Workload, sink: W) -> Result<(), WorkloadError> {
    let mut out = BufWriter::new(sink);
    let m = &workload.metadata;
    let header = Header {
        tracesynth_workload: FORMAT_VERSION,
        mode: m.mode,
        seed: m.seed,
        trace_fingerprint: m.trace_fingerprint.clone(),
        config_digest: m.config_digest.clone(),
        query_count: workload.queries.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for q in &workload.queries {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_workload<R: Read>(source: R) -> Result<Workload, WorkloadError> {
    let mut lines = BufReader::new(source).lines();
    let first = lines.next().ok_or(WorkloadError::Format {
        line: 1,
        reason: "missing header".into(),
    })??;
    let header: Header = serde_json::from_str(&first).map_err(|e| WorkloadError::Format {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.tracesynth_workload != FORMAT_VERSION {
        return Err(WorkloadError::Format {
            line: 1,
            reason: format!("unsupported format version {}", header.tracesynth_workload),
        });
    }
    let mut queries = Vec::with_capacity(header.query_count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: SynthesizedQuery = serde_json::from_str(&line).map_err(|e| WorkloadError::Format {
            line: i + 2,
            reason: e.to_string(),
        })?;
        queries.push(q);
    }
    if queries.len() != header.query_count {
        return Err(WorkloadError::Format {
            line: queries.len() + 1,
            reason: format!(
                "header announces {} queries, found {}",
                header.query_count,
                queries.len()
            ),
        });
    }
    let workload = Workload {
        metadata: WorkloadMetadata {
            mode: header.mode,
            seed: header.seed,
            trace_fingerprint: header.trace_fingerprint,
            config_digest: header.config_digest,
        },
        queries,
    };
    workload.validate()?;
    Ok(workload)
}

pub fn write_workload_file(workload: &Workload, path: &Path) -> Result<(), WorkloadError> {
    emit_workload(workload, File::create(path)?)
}

pub fn read_workload_file(path: &Path) -> Result<Workload, WorkloadError> {
    load_workload(File::open(path)?)
}
