//! Downstream classifiers trained on Class-Encoder features.

pub mod forest;
pub mod mlp;

pub use forest::{forest_train, DecisionTree, ForestModel, ForestParams, Node};
pub use mlp::{mlp_init, mlp_train, MlpGradients, MlpModel, MlpParams};

use crate::error::{param, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Labels plus an `n × l` row-stochastic score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions<T> {
    pub labels: Vec<usize>,
    pub scores: Matrix<T>,
}

/// Argmax of every row, ties toward the smaller column.
pub fn argmax_rows<T: Scalar>(scores: &Matrix<T>) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub(crate) fn check_labels(labels: &[usize], n: usize, num_classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(param(format!("{} labels for {n} samples", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(param(format!("label {bad} outside 0..{num_classes}")));
    }
    Ok(())
}
