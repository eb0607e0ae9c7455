//! CSV outputs of a sweep and their aligned text rendering.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! CSVs carry full precision and are byte-stable across runs. Reports
//! round to two decimals.

use std::fs;
use std::path::Path;

use super::sweep::{win_loss, ResultRow, WinLoss};
use crate::error::{Error, Result};
use crate::segment::Method;

/// Tolerance for calling two best scores equal in the winner/loser table.
pub const SCORE_TOL: f64 = 1e-6;

/// Methods compared in the winner/loser table.
pub const COMPARED: [Method; 3] = [Method::Sa, Method::SegEm, Method::SegMm];

pub const TABLE_FILES: [&str; 5] = ["table1.csv", "table2.csv", "table3.csv", "runs.csv", "notes.csv"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "na".to_string(), |v| v.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

/// A table as header plus string records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
    }

    /// Parses a CSV with a header; every record must match its width.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Parse { line: 1, msg: "missing header".into() });
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(Error::Parse { line: i + 2, msg: format!("{} fields, expected {}", rec.len(), header.len()) });
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    /// Aligned text with numeric fields containing a fraction or exponent
    /// rounded to two decimals.
    pub fn render(&self) -> String {
        let cell = |s: &str| -> String {
            match s.parse::<f64>() {
                Ok(v) if s.contains(['.', 'e', 'E']) && v.is_finite() => format!("{v:.2}"),
                _ => s.to_string(),
            }
        };
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| cell(c)).collect()).collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| body.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            s.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
        out.push('\n');
        for r in &body {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn key(r: &ResultRow) -> Vec<String> {
    vec![r.dataset.to_string(), r.q.clone(), r.precision.to_string(), r.method.to_string()]
}

/// Best score and number of distinct outputs per cell.
pub fn table1(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(&["dataset", "Q", "M", "method", "best_lnp", "distinct_outputs"]);
    for r in rows {
        let mut rec = key(r);
        rec.push(opt(r.best_score));
        rec.push(if r.best_score.is_some() { r.distinct_outputs.to_string() } else { "na".into() });
        t.rows.push(rec);
    }
    t
}

/// Hamming distance of each method's best path to the best path overall.
pub fn table2(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(&["dataset", "Q", "M", "method", "hamming_to_best"]);
    for r in rows {
        let mut rec = key(r);
        rec.push(opt(r.hamming_to_best));
        t.rows.push(rec);
    }
    t
}

pub fn table3(wl: &[WinLoss]) -> Table {
    let mut t = Table::new(&["Q", "M", "method", "wins", "losses", "cells"]);
    for w in wl {
        t.rows.push(vec![
            w.q.clone(),
            w.precision.to_string(),
            w.method.to_string(),
            w.wins.to_string(),
            w.losses.to_string(),
            w.cells.to_string(),
        ]);
    }
    t
}

/// One line per (cell, initial path).
pub fn runs(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(&["dataset", "Q", "M", "method", "init", "lnp"]);
    for r in rows {
        for (i, s) in r.init_scores.iter().enumerate() {
            let mut rec = key(r);
            rec.push((i + 1).to_string());
            rec.push(opt(*s));
            t.rows.push(rec);
        }
    }
    t
}

pub fn notes(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(&["dataset", "Q", "M", "method", "note"]);
    for r in rows.iter().filter(|r| !r.note.is_empty()) {
        let mut rec = key(r);
        rec.push(r.note.clone());
        t.rows.push(rec);
    }
    t
}

/// All tables in [`TABLE_FILES`] order.
pub fn all_tables(rows: &[ResultRow]) -> Vec<Table> {
    vec![table1(rows), table2(rows), table3(&win_loss(rows, &COMPARED, SCORE_TOL)), runs(rows), notes(rows)]
}

pub fn write_tables(rows: &[ResultRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, t) in TABLE_FILES.iter().zip(all_tables(rows)) {
        fs::write(dir.join(name), t.to_csv()?)?;
    }
    Ok(())
}

/// Text rendering of the three summary tables found in `dir`.
pub fn render_dir_text(dir: &Path) -> Result<String> {
    let mut out = String::new();
    for name in &TABLE_FILES[..3] {
        let t = Table::parse_csv(&fs::read_to_string(dir.join(name))?)?;
        out.push_str(&format!("== {name}\n{}\n", t.render()));
    }
    Ok(out)
}
