//! Sample matrices, labels and the ways to obtain them: image manifests,
//! numeric tables and a synthetic generator, plus train/test protocols.

mod manifest;
mod split;
mod synth;
mod table;

pub use manifest::{load_manifest, load_manifest_with, resize_bilinear, ImageSize};
pub use split::{
    split_stratified, split_stratified_balanced, split_subject_disjoint, stratified_indices,
    subject_disjoint_indices,
};
pub use synth::{synth_blobs, BlobSpec};
pub use table::{read_table, write_table};

use std::path::Path;

use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Samples as columns of `x` (`m × n`) with class labels and optional subject ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    pub labels: Vec<usize>,
    pub subjects: Option<Vec<String>>,
    pub class_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        x: Matrix<T>,
        labels: Vec<usize>,
        subjects: Option<Vec<String>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self { x, labels, subjects, class_names };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.cols() != self.labels.len() {
            return Err(param(format!(
                "{} samples but {} labels",
                self.x.cols(),
                self.labels.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.class_names.len()) {
            return Err(param(format!(
                "label {bad} outside the {} known classes",
                self.class_names.len()
            )));
        }
        if let Some(s) = &self.subjects {
            if s.len() != self.labels.len() {
                return Err(param(format!("{} subjects for {} samples", s.len(), self.labels.len())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Samples at `idx`, in that order; class names are kept.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_columns(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            subjects: self
                .subjects
                .as_ref()
                .map(|s| idx.iter().map(|&i| s[i].clone()).collect()),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Re-indexes labels against `names` (e.g. the classes a model was trained on).
    pub fn relabel(&self, names: &[String]) -> Result<Self> {
        let map: Vec<usize> = self
            .class_names
            .iter()
            .map(|c| {
                names.iter().position(|n| n == c).ok_or_else(|| {
                    Error::Protocol(format!("class {c:?} is not one of the model's classes {names:?}"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            x: self.x.clone(),
            labels: self.labels.iter().map(|&y| map[y]).collect(),
            subjects: self.subjects.clone(),
            class_names: names.to_vec(),
        })
    }
}

/// One-hot label matrix `C` (`l × n`).
#[derive(Clone, Debug, PartialEq)]
pub struct OneHotLabels<T> {
    pub c: Matrix<T>,
}

pub fn one_hot_labels<T: Scalar>(labels: &[usize], num_classes: usize) -> Result<OneHotLabels<T>> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(param(format!("label {bad} outside 0..{num_classes}")));
    }
    let c = Matrix::from_fn(num_classes, labels.len(), |i, j| {
        if labels[j] == i {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(OneHotLabels { c })
}

pub fn one_hot<T: Scalar>(dataset: &Dataset<T>) -> Result<OneHotLabels<T>> {
    one_hot_labels(&dataset.labels, dataset.num_classes())
}

/// Loads either an image manifest (header starting with `path`) or a numeric
/// table (header starting with `label`).
pub fn load_data(path: &Path, size: ImageSize) -> Result<Dataset<f64>> {
    let text = std::fs::read_to_string(path)?;
    let first = text
        .lines()
        .next()
        .ok_or(Error::Ingestion { line: 1, reason: "file is empty".into() })?;
    match first.split(',').next().map(str::trim) {
        Some("path") => load_manifest_with(path, size),
        Some("label") => read_table(path),
        _ => Err(Error::Ingestion {
            line: 1,
            reason: format!("unrecognised header {first:?}"),
        }),
    }
}

/// Assigns class indices in first-appearance order.
pub(crate) fn index_classes<'a>(names: impl IntoIterator<Item = &'a str>) -> (Vec<usize>, Vec<String>) {
    let mut classes: Vec<String> = Vec::new();
    let labels = names
        .into_iter()
        .map(|n| match classes.iter().position(|c| c == n) {
            Some(i) => i,
            None => {
                classes.push(n.to_string());
                classes.len() - 1
            }
        })
        .collect();
    (labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_direct_construction() {
        let c = one_hot_labels::<f64>(&[0, 1, 0], 2).unwrap().c;
        assert_eq!(c.data(), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let c = one_hot_labels::<f64>(&[0, 0, 0, 0], 1).unwrap().c;
        assert_eq!(c.data(), &[1.0; 4]);
        assert!(one_hot_labels::<f64>(&[0, 3], 3).is_err());
    }

    #[test]
    fn first_appearance_order() {
        let (labels, names) = index_classes(["b", "a", "b", "c"]);
        assert_eq!(labels, vec![0, 1, 0, 2]);
        assert_eq!(names, vec!["b", "a", "c"]);
    }

    #[test]
    fn relabel_checks_class_sets() {
        let ds = Dataset::new(
            Matrix::<f64>::zeros(1, 2),
            vec![0, 1],
            None,
            vec!["y".into(), "x".into()],
        )
        .unwrap();
        let r = ds.relabel(&["x".into(), "y".into()]).unwrap();
        assert_eq!(r.labels, vec![1, 0]);
        assert!(matches!(ds.relabel(&["x".into()]), Err(Error::Protocol(_))));
    }

    #[test]
    fn invalid_datasets_rejected() {
        assert!(Dataset::new(Matrix::<f64>::zeros(1, 2), vec![0], None, vec!["a".into()]).is_err());
        assert!(Dataset::new(Matrix::<f64>::zeros(1, 1), vec![1], None, vec!["a".into()]).is_err());
        assert!(Dataset::new(Matrix::<f64>::zeros(1, 1), vec![0], Some(vec![]), vec!["a".into()]).is_err());
    }
}
