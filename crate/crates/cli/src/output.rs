//! Result rows and their CSV / JSON encodings.
//!
//! An undefined restorability (no path needed protection) is an empty CSV
//! field and a JSON `null`; so is `runtime_s` unless timing was requested.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Column order of the CSV output.
pub const COLUMNS: [&str; 11] = [
    "mode",
    "load_erlang",
    "avg_avail",
    "a_th",
    "seed",
    "bp",
    "bbp",
    "utilization",
    "protection_capacity",
    "restorability",
    "runtime_s",
];

/// The JSON schema shipped for the JSON output.
pub const JSON_SCHEMA: &str = include_str!("../schema/results.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: String,
    pub load_erlang: f64,
    pub avg_avail: f64,
    pub a_th: f64,
    pub seed: u64,
    pub bp: f64,
    pub bbp: f64,
    pub utilization: f64,
    /// Link-slot seconds reserved for protection over the measured window.
    pub protection_capacity: f64,
    pub restorability: Option<f64>,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == COLUMNS, "unexpected header {header:?}");
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn encode(rows: &[ResultRow], format: Format) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(rows, &mut buf)?,
        Format::Json => write_json(rows, &mut buf)?,
    }
    Ok(buf)
}

pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> anyhow::Result<()> {
    let bytes = encode(rows, format)?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
