//! Deep Class-Encoder: a stacked linear autoencoder whose codes are also fit to
//! one-hot class labels, trained with closed-form block updates, together with
//! the classifiers, metrics and data handling needed to run it end to end.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what training and the model files use.

pub mod classifiers;
pub mod cli;
pub mod data;
pub mod deep;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod model_file;
pub mod pipeline;
pub mod scalar;
pub mod svd;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseMatrix = matrix::Matrix<f64>;
pub type DenseMatrixF32 = matrix::Matrix<f32>;
pub type LayerWeights = encoder::ClassEncoderLayer<f64>;
pub type DeepClassEncoderModel = deep::DeepModel<f64>;
pub type Dataset = data::Dataset<f64>;
pub type OneHotLabels = data::OneHotLabels<f64>;
pub type MlpModel = classifiers::MlpModel<f64>;
pub type ForestModel = classifiers::ForestModel<f64>;

pub use encoder::TrainConfig;
pub use eval::EvaluationReport;
