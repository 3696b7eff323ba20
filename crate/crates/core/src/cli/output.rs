//! CSV and JSON artifacts. Floats are written as `{:.16e}`, which parses back
//! to the same `f64`, so read-then-write reproduces a file byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{BifurcationReport, Comparison, EnsembleResult};

pub const HISTORY_HEADER: [&str; 5] = [
    "generation",
    "mean_best_fitness",
    "stderr_best_fitness",
    "mean_best_x",
    "mean_best_y",
];

pub const BIFURCATION_HEADER: [&str; 3] = ["lambda", "switch_fraction", "n_runs"];

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Schema(format!("`{s}` is not a number")))
}

fn parse_optional(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_float(s).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: usize,
    pub mean_best_fitness: f64,
    pub stderr_best_fitness: f64,
    pub mean_best_x: Option<f64>,
    pub mean_best_y: Option<f64>,
}

pub fn history_rows(result: &EnsembleResult) -> Vec<HistoryRow> {
    (0..result.mean_best_fitness.len())
        .map(|g| {
            let p = &result.mean_best_point[g];
            HistoryRow {
                generation: g,
                mean_best_fitness: result.mean_best_fitness[g],
                stderr_best_fitness: result.stderr_best_fitness[g],
                mean_best_x: p.first().copied(),
                mean_best_y: p.get(1).copied(),
            }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().from_reader(file))
}

fn check_header(r: &mut csv::Reader<File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = r.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: expected header `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

pub fn write_history_rows(rows: &[HistoryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(HISTORY_HEADER)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.generation.to_string(),
            fmt_float(r.mean_best_fitness),
            fmt_float(r.stderr_best_fitness),
            opt(r.mean_best_x),
            opt(r.mean_best_y),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_history_csv(result: &EnsembleResult, path: &Path) -> Result<()> {
    write_history_rows(&history_rows(result), path)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = reader(path)?;
    check_header(&mut r, &HISTORY_HEADER, path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(HistoryRow {
                generation: rec[0]
                    .parse()
                    .map_err(|_| Error::Schema(format!("bad generation `{}`", &rec[0])))?,
                mean_best_fitness: parse_float(&rec[1])?,
                stderr_best_fitness: parse_float(&rec[2])?,
                mean_best_x: parse_optional(&rec[3])?,
                mean_best_y: parse_optional(&rec[4])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationRow {
    pub lambda: f64,
    pub switch_fraction: f64,
    pub n_runs: usize,
}

pub fn bifurcation_rows(report: &BifurcationReport) -> Vec<BifurcationRow> {
    report
        .lambda_grid
        .iter()
        .zip(&report.switch_fraction)
        .map(|(&lambda, &switch_fraction)| BifurcationRow {
            lambda,
            switch_fraction,
            n_runs: report.n_runs,
        })
        .collect()
}

pub fn write_bifurcation_rows(rows: &[BifurcationRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(BIFURCATION_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_float(r.lambda),
            fmt_float(r.switch_fraction),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_bifurcation_csv(report: &BifurcationReport, path: &Path) -> Result<()> {
    write_bifurcation_rows(&bifurcation_rows(report), path)
}

pub fn read_bifurcation_csv(path: &Path) -> Result<Vec<BifurcationRow>> {
    let mut r = reader(path)?;
    check_header(&mut r, &BIFURCATION_HEADER, path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(BifurcationRow {
                lambda: parse_float(&rec[0])?,
                switch_fraction: parse_float(&rec[1])?,
                n_runs: rec[2]
                    .parse()
                    .map_err(|_| Error::Schema(format!("bad run count `{}`", &rec[2])))?,
            })
        })
        .collect()
}

pub fn write_comparison_csv(cmp: &Comparison, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["variant", "mean_final_best_fitness", "stderr_final_best_fitness", "n_runs"])?;
    for r in &cmp.rows {
        w.write_record([
            r.variant.name().to_string(),
            fmt_float(r.mean_final_best_fitness),
            fmt_float(r.stderr_final_best_fitness),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_series_csv(header: [&str; 2], values: &[f64], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_float(*v)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Schema(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
