use std::path::{Path, PathBuf};

use image::DynamicImage;
use rayon::prelude::*;

use super::{index_classes, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Target raster size; `width × height` is the sample dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

impl Default for ImageSize {
    /// 64 × 48, i.e. 3072 values per image.
    fn default() -> Self {
        Self { width: 64, height: 48 }
    }
}

impl ImageSize {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

struct Record {
    line: usize,
    path: PathBuf,
    label: String,
    subject: Option<String>,
}

pub fn load_manifest(path: &Path) -> Result<Dataset<f64>> {
    load_manifest_with(path, ImageSize::default())
}

/// Reads a `path,label[,subject]` manifest and loads each image as one column
/// of grayscale values in `[0, 1]`, resized bilinearly to `size`.
pub fn load_manifest_with(path: &Path, size: ImageSize) -> Result<Dataset<f64>> {
    if size.width == 0 || size.height == 0 {
        return Err(Error::Parameter(format!("resize target {size:?} is empty")));
    }
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Ingestion { line: 1, reason: "manifest lists no images".into() });
    }
    let columns: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| {
            let img = image::open(&r.path).map_err(|e| Error::Ingestion {
                line: r.line,
                reason: format!("{}: {e}", r.path.display()),
            })?;
            Ok(image_column(&img, size))
        })
        .collect::<Result<_>>()?;

    let m = size.pixels();
    let n = columns.len();
    let x = Matrix::from_fn(m, n, |i, j| columns[j][i]);
    let (labels, class_names) = index_classes(records.iter().map(|r| r.label.as_str()));
    let subjects = if records.iter().all(|r| r.subject.is_some()) {
        Some(records.into_iter().map(|r| r.subject.unwrap()).collect())
    } else {
        None
    };
    Dataset::new(x, labels, subjects, class_names)
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingestion { line: 0, reason: format!("{}: {e}", path.display()) })?;
    let header = reader
        .headers()
        .map_err(|e| Error::Ingestion { line: 1, reason: e.to_string() })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let with_subject = match cols.as_slice() {
        ["path", "label"] => false,
        ["path", "label", "subject"] => true,
        _ => {
            return Err(Error::Ingestion {
                line: 1,
                reason: format!("expected header path,label[,subject], got {}", cols.join(",")),
            })
        }
    };

    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols.len() {
            return Err(Error::Ingestion {
                line,
                reason: format!("record has {} fields, header has {}", rec.len(), cols.len()),
            });
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Ingestion { line, reason: "empty path or label".into() });
        }
        let subject = if with_subject {
            if rec[2].is_empty() {
                return Err(Error::Ingestion { line, reason: "empty subject".into() });
            }
            Some(rec[2].to_string())
        } else {
            None
        };
        out.push(Record {
            line,
            path: base.join(&rec[0]),
            label: rec[1].to_string(),
            subject,
        });
    }
    Ok(out)
}

/// 8-bit grayscale (luma 0.299/0.587/0.114 for colour input), scaled to
/// `[0, 1]`, resized and flattened row by row.
fn image_column(img: &DynamicImage, size: ImageSize) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray: Vec<f64> = if img.color().has_color() {
        img.to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                y.round().clamp(0.0, 255.0) / 255.0
            })
            .collect()
    } else {
        img.to_luma8().pixels().map(|p| p.0[0] as f64 / 255.0).collect()
    };
    resize_bilinear(&gray, w, h, size.width, size.height)
}

/// Bilinear resampling with pixel-centre alignment; `src` is row-major `w × h`.
pub fn resize_bilinear(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    assert_eq!(src.len(), w * h);
    let coord = |o: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, s - lo as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| coord(x, out_w, w)).collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, ty) = coord(y, out_h, h);
        for &(x0, x1, tx) in &xs {
            let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
            let top = lerp(src[y0 * w + x0], src[y0 * w + x1], tx);
            let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], tx);
            out.push(lerp(top, bottom, ty).clamp(0.0, 1.0));
        }
    }
    out
}
