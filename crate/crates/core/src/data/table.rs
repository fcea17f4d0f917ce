//! Numeric sample tables: header `label,subject,v0,…,v{m−1}`, one sample per
//! record. Used for synthetic datasets and for encoded feature files.

use std::io::Write;
use std::path::Path;

use super::{index_classes, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn write_table(path: &Path, ds: &Dataset<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "label,subject")?;
    for i in 0..ds.dim() {
        write!(out, ",v{i}")?;
    }
    writeln!(out)?;
    for j in 0..ds.len() {
        let subject = ds.subjects.as_ref().map_or("", |s| s[j].as_str());
        write!(out, "{},{}", ds.class_names[ds.labels[j]], subject)?;
        for i in 0..ds.dim() {
            // `{}` on f64 is the shortest representation that parses back exactly.
            write!(out, ",{}", ds.x[(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Dataset<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Ingestion { line: 0, reason: format!("{}: {e}", path.display()) })?;
    let header = reader
        .headers()
        .map_err(|e| Error::Ingestion { line: 1, reason: e.to_string() })?
        .clone();
    if header.len() < 2 || &header[0] != "label" || &header[1] != "subject" {
        return Err(Error::Ingestion {
            line: 1,
            reason: "expected header label,subject,v0,...".into(),
        });
    }
    let m = header.len() - 2;
    let mut names = Vec::new();
    let mut subjects = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Ingestion {
                line,
                reason: format!("record has {} fields, header has {}", rec.len(), header.len()),
            });
        }
        names.push(rec[0].to_string());
        subjects.push(rec[1].to_string());
        for field in rec.iter().skip(2) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Ingestion {
                line,
                reason: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion { line, reason: format!("non-finite value {field:?}") });
            }
            values.push(v);
        }
    }
    let n = names.len();
    if n == 0 {
        return Err(Error::Ingestion { line: 1, reason: "table has no samples".into() });
    }
    let x = Matrix::from_fn(m, n, |i, j| values[j * m + i]);
    let (labels, class_names) = index_classes(names.iter().map(String::as_str));
    let subjects = if subjects.iter().all(|s| !s.is_empty()) {
        Some(subjects)
    } else {
        None
    };
    Dataset::new(x, labels, subjects, class_names)
}
