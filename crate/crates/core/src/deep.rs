//! Stacked (deep) Class-Encoder trained greedily, one layer at a time.

use crate::encoder::{encode, objective, train_layer, ClassEncoderLayer, TrainConfig, TrainTrace};
use crate::error::{param, Error, Result};
use crate::matrix::{matmul, Matrix};
use crate::scalar::Scalar;

/// What training produced besides the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMeta<T> {
    pub traces: Vec<TrainTrace<T>>,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepModel<T> {
    pub layers: Vec<ClassEncoderLayer<T>>,
    /// `[m, h₁, …, h_k]`
    pub dims: Vec<usize>,
    pub num_classes: usize,
    pub meta: TrainingMeta<T>,
}

impl<T: Scalar> DeepModel<T> {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.dims.last().expect("dims is never empty")
    }

    pub fn top(&self) -> &ClassEncoderLayer<T> {
        self.layers.last().expect("model has at least one layer")
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.dims.len() != self.layers.len() + 1 {
            return Err(param(format!(
                "model has {} layers but {} dims",
                self.layers.len(),
                self.dims.len()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.w_e.shape() != (self.dims[i + 1], self.dims[i]) {
                return Err(Error::Shape {
                    op: "deep model layer",
                    left: layer.w_e.shape(),
                    right: (self.dims[i + 1], self.dims[i]),
                });
            }
            if layer.num_classes() != self.num_classes {
                return Err(param(format!(
                    "layer {i} maps to {} classes, model has {}",
                    layer.num_classes(),
                    self.num_classes
                )));
            }
        }
        Ok(())
    }
}

/// Greedy layer-wise training: layer `i` sees `Xⁱ = W_eⁱ⁻¹ Xⁱ⁻¹`, every
/// layer's mapping targets the same `C`, and all layers share `config`.
pub fn train_deep<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    hidden_dims: &[usize],
    config: &TrainConfig,
) -> Result<DeepModel<T>> {
    if hidden_dims.is_empty() {
        return Err(param("hidden_dims must contain at least one layer"));
    }
    if let Some(i) = hidden_dims.iter().position(|&h| h == 0) {
        return Err(param(format!("hidden layer {i} has zero width")));
    }
    let mut dims = Vec::with_capacity(hidden_dims.len() + 1);
    dims.push(x.rows());
    dims.extend_from_slice(hidden_dims);

    let mut layers = Vec::with_capacity(hidden_dims.len());
    let mut traces = Vec::with_capacity(hidden_dims.len());
    let mut input = x.clone();
    for (i, &h) in hidden_dims.iter().enumerate() {
        let (layer, trace) = train_layer(&input, c, h, config)?;
        if i + 1 < hidden_dims.len() {
            input = encode(&layer, &input)?;
        }
        layers.push(layer);
        traces.push(trace);
    }
    Ok(DeepModel {
        layers,
        dims,
        num_classes: c.rows(),
        meta: TrainingMeta {
            traces,
            config: *config,
        },
    })
}

/// Top-layer code `Hᵏ = W_eᵏ … W_e¹ X`.
pub fn features<T: Scalar>(model: &DeepModel<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.rows() != model.input_dim() {
        return Err(Error::Shape {
            op: "features",
            left: x.shape(),
            right: (model.input_dim(), x.cols()),
        });
    }
    let mut h = encode(&model.layers[0], x)?;
    for layer in &model.layers[1..] {
        h = encode(layer, &h)?;
    }
    Ok(h)
}

/// Joint stacked objective: end-to-end reconstruction through every encoder
/// and then every decoder, plus `λ Σᵢ ‖C − Mⁱ W_eⁱ Xⁱ‖²`.
pub fn deep_objective<T: Scalar>(
    model: &DeepModel<T>,
    x: &Matrix<T>,
    c: &Matrix<T>,
    lambda: T,
) -> Result<T> {
    if model.depth() == 1 {
        let mut layer = model.layers[0].clone();
        layer.lambda = lambda;
        return objective(x, c, &layer);
    }
    if x.rows() != model.input_dim() || c.cols() != x.cols() || c.rows() != model.num_classes {
        return Err(Error::Shape {
            op: "deep_objective",
            left: x.shape(),
            right: c.shape(),
        });
    }
    let mut label_term = T::zero();
    let mut h = x.clone();
    for layer in &model.layers {
        h = encode(layer, &h)?;
        if lambda != T::zero() {
            label_term += c.dist_sq(&matmul(&layer.m_map, &h)?)?;
        }
    }
    for layer in model.layers.iter().rev() {
        h = matmul(&layer.w_d, &h)?;
    }
    Ok(x.dist_sq(&h)? + lambda * label_term)
}

/// Row-wise argmax per column, ties toward the smaller index.
pub fn argmax_columns<T: Scalar>(scores: &Matrix<T>) -> Vec<usize> {
    (0..scores.cols())
        .map(|j| {
            let mut best = 0;
            for i in 1..scores.rows() {
                if scores[(i, j)] > scores[(best, j)] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Class scores `Mᵏ Hᵏ` from the top layer's mapping (`l × n`).
pub fn direct_scores<T: Scalar>(model: &DeepModel<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    matmul(&model.top().m_map, &features(model, x)?)
}

/// Label readout from the top mapping: `argmax_rows(Mᵏ Hᵏ)` per sample.
pub fn predict_direct<T: Scalar>(model: &DeepModel<T>, x: &Matrix<T>) -> Result<Vec<usize>> {
    Ok(argmax_columns(&direct_scores(model, x)?))
}
