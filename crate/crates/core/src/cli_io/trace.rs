//! Tabular experiment output and its CSV / JSON serializations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::OutputFormat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Column {
            name: name.into(),
            unit: unit.into(),
        }
    }

    pub fn header(&self) -> String {
        format!("{}[{}]", self.name, self.unit)
    }

    fn parse_header(h: &str) -> Result<Self> {
        let h = h.trim();
        match (h.find('['), h.strip_suffix(']')) {
            (Some(i), Some(_)) if i > 0 => Ok(Column::new(&h[..i], &h[i + 1..h.len() - 1])),
            _ => Err(Error::invalid(format!(
                "column header '{h}' is not of the form name[unit]"
            ))),
        }
    }
}

/// Rectangular table of numbers with named, unit-carrying columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRecord {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, Value>,
}

impl TraceRecord {
    pub fn new(columns: Vec<Column>) -> Self {
        TraceRecord {
            columns,
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.columns {
            if c.name.is_empty() || c.unit.is_empty() || c.header().contains(',') {
                return Err(Error::invalid(format!(
                    "column '{}' needs a comma-free name and unit",
                    c.header()
                )));
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            if r.len() != self.columns.len() {
                return Err(Error::invalid(format!(
                    "row {k} has {} values for {} columns",
                    r.len(),
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }

    /// Index of the column called `name` (without unit).
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn emit(record: &TraceRecord, format: OutputFormat) -> Result<Vec<u8>> {
    record.validate()?;
    match format {
        OutputFormat::Csv => emit_csv(record),
        OutputFormat::Json => emit_json(record),
    }
}

fn emit_csv(record: &TraceRecord) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in &record.metadata {
        let line = format!(
            "# {k}: {}\n",
            serde_json::to_string(v).expect("json values serialize")
        );
        out.extend_from_slice(line.as_bytes());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record(record.columns.iter().map(Column::header))
        .map_err(io)?;
    for row in &record.rows {
        w.write_record(row.iter().map(|x| format_number(*x)))
            .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))
}

#[derive(Serialize, Deserialize)]
struct JsonColumns {
    names: Vec<String>,
    units: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    columns: JsonColumns,
    rows: Vec<Vec<Option<f64>>>,
    metadata: BTreeMap<String, Value>,
}

fn emit_json(record: &TraceRecord) -> Result<Vec<u8>> {
    let doc = JsonRecord {
        columns: JsonColumns {
            names: record.columns.iter().map(|c| c.name.clone()).collect(),
            units: record.columns.iter().map(|c| c.unit.clone()).collect(),
        },
        // JSON has no NaN or infinity; those become null.
        rows: record
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect())
            .collect(),
        metadata: record.metadata.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("json values serialize");
    out.push(b'\n');
    Ok(out)
}

/// Reads a record written by [`emit`] in either format.
pub fn ingest(bytes: &[u8]) -> Result<TraceRecord> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::invalid("trace is not UTF-8"))?;
    if text.trim_start().starts_with('{') {
        ingest_json(text)
    } else {
        ingest_csv(text)
    }
}

fn ingest_json(text: &str) -> Result<TraceRecord> {
    let doc: JsonRecord =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad JSON trace: {e}")))?;
    if doc.columns.names.len() != doc.columns.units.len() {
        return Err(Error::invalid(
            "JSON trace has mismatched column names and units",
        ));
    }
    let rec = TraceRecord {
        columns: doc
            .columns
            .names
            .iter()
            .zip(&doc.columns.units)
            .map(|(n, u)| Column::new(n, u))
            .collect(),
        rows: doc
            .rows
            .into_iter()
            .map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
            .collect(),
        metadata: doc.metadata,
    };
    rec.validate()?;
    Ok(rec)
}

fn ingest_csv(text: &str) -> Result<TraceRecord> {
    let mut metadata = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].trim_start().split_once(": ") {
            if let Ok(v) = serde_json::from_str(v) {
                metadata.insert(k.to_string(), v);
            }
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let columns = r
        .headers()
        .map_err(|e| Error::invalid(format!("bad CSV header: {e}")))?
        .iter()
        .map(Column::parse_header)
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(format!("bad CSV row {k}: {e}")))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("row {k}: '{s}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let rec = TraceRecord {
        columns,
        rows,
        metadata,
    };
    rec.validate()?;
    Ok(rec)
}
