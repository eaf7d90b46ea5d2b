//! CSV and JSON Lines output with fixed float formatting.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::config::Emit;
use crate::error::{CliError, Result};

pub const SCHEMA_LINE: &str = "# schema=1";

/// 17 significant digits; `-0` prints as `0`.
pub fn fnum(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(fnum).unwrap_or_default()
}

pub fn cnum(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [fnum(z.re), fnum(z.im)],
        None => [String::new(), String::new()],
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub records: Vec<serde_json::Value>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>, record: serde_json::Value) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
        self.records.push(record);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = format!("{SCHEMA_LINE}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    /// Writes to `<dir>/<stem>.csv` and `.jsonl`, or to stdout when `dir` is `None`.
    pub fn emit(&self, how: Emit, dir: Option<&Path>, stem: &str) -> Result<()> {
        let mut parts = Vec::new();
        if matches!(how, Emit::Csv | Emit::Both) {
            parts.push(("csv", self.to_csv()?));
        }
        if matches!(how, Emit::Json | Emit::Both) {
            parts.push(("jsonl", self.to_jsonl()));
        }
        match dir {
            Some(d) => {
                std::fs::create_dir_all(d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
                for (ext, text) in parts {
                    let p = d.join(format!("{stem}.{ext}"));
                    std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                }
            }
            None => {
                let mut out = std::io::stdout().lock();
                for (_, text) in parts {
                    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
