//! Report emission: RFC-4180 CSV or JSON, each carrying provenance (tool
//! version, master seed, spec hash).

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::runner::ReportRow;
use crate::spec::{spec_hash, ExperimentSpec, ReportFormat};
use crate::CliError;

pub const TOOL_VERSION: &str = concat!("noisekey ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub master_seed: u64,
    pub spec_sha256: String,
}

impl Provenance {
    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        Provenance {
            tool: TOOL_VERSION.to_string(),
            master_seed: spec.master_seed,
            spec_sha256: spec_hash(spec),
        }
    }
}

/// Full JSON report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub provenance: Provenance,
    pub rows: Vec<ReportRow>,
}

fn format_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes rows as CSV: one provenance comment line, a header, then one
/// record per row. Sweep coordinates become leading columns. Wall time is
/// deliberately not a column — with a fixed master seed the bytes are then
/// identical across runs.
pub fn write_csv<W: Write>(
    rows: &[ReportRow],
    provenance: &Provenance,
    out: W,
) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::config("refusing to emit an empty report"));
    }
    let sweep_params: Vec<String> = rows[0].sweep.iter().map(|(k, _)| k.clone()).collect();
    let mut writer = csv_writer_with_comment(out, provenance)?;

    let mut header: Vec<String> = sweep_params.clone();
    header.extend(
        ["metric", "estimate", "std_error", "trials"]
            .iter()
            .map(|s| s.to_string()),
    );
    writer
        .write_record(&header)
        .map_err(|e| CliError::runtime(format!("csv write failed: {e}")))?;

    for row in rows {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        if row.sweep.len() != sweep_params.len() {
            return Err(CliError::runtime("rows disagree on sweep columns"));
        }
        for (_, v) in &row.sweep {
            record.push(format_value(v));
        }
        record.push(row.metric.clone());
        record.push(row.estimate.to_string());
        record.push(row.std_error.to_string());
        record.push(row.trials.to_string());
        writer
            .write_record(&record)
            .map_err(|e| CliError::runtime(format!("csv write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::runtime(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn csv_writer_with_comment<W: Write>(
    mut out: W,
    provenance: &Provenance,
) -> Result<csv::Writer<W>, CliError> {
    writeln!(
        out,
        "# {} master_seed={} spec_sha256={}",
        provenance.tool, provenance.master_seed, provenance.spec_sha256
    )
    .map_err(|e| CliError::runtime(format!("write failed: {e}")))?;
    Ok(csv::WriterBuilder::new().from_writer(out))
}

/// Writes the JSON report document.
pub fn write_json<W: Write>(
    rows: &[ReportRow],
    provenance: &Provenance,
    mut out: W,
) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::config("refusing to emit an empty report"));
    }
    let report = JsonReport {
        provenance: provenance.clone(),
        rows: rows.to_vec(),
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("json serialization failed: {e}")))?;
    writeln!(out, "{text}").map_err(|e| CliError::runtime(format!("write failed: {e}")))?;
    Ok(())
}

/// Parses a JSON report back into rows (the round-trip counterpart of
/// [`write_json`]).
pub fn parse_json_report(text: &str) -> Result<JsonReport, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(format!("bad report: {e}")))
}

/// Emits a report to a file or stdout in the requested format.
pub fn emit_report(
    rows: &[ReportRow],
    provenance: &Provenance,
    format: ReportFormat,
    path: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| {
            CliError::runtime(format!("cannot write {}: {e}", p.display()))
        })?),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        ReportFormat::Csv => write_csv(rows, provenance, sink),
        ReportFormat::Json => write_json(rows, provenance, sink),
    }
}
