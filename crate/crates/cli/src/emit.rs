//! Deterministic text artifacts: commented CSV and JSON documents that both
//! carry the full parameter set used to produce them.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

/// Ordered `key=value` pairs describing how an artifact was produced.
#[derive(Debug, Clone)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        let mut p = Self { entries: Vec::new() };
        p.push("tool", concat!("spsqkd ", env!("CARGO_PKG_VERSION")));
        p.push("command", command);
        p
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, fmt_num(value))
    }

    fn write_comment(&self, out: &mut impl Write) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        let map: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        Value::Object(map)
    }
}

/// Shortest round-trip representation; scientific notation outside
/// `[1e-4, 1e6)` so that tiny key rates stay readable.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Comment header, column row, data rows.
pub fn write_csv<W: Write>(
    mut out: W,
    provenance: &Provenance,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    provenance.write_comment(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `{"parameters": {...}, "result": value}`, pretty-printed.
pub fn write_json<W: Write>(mut out: W, provenance: &Provenance, value: &impl Serialize) -> Result<()> {
    let mut doc = Map::new();
    doc.insert("parameters".into(), provenance.to_json());
    doc.insert("result".into(), serde_json::to_value(value)?);
    serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_text<W: Write>(mut out: W, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
