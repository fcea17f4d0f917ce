//! Feature extraction plus a downstream classifier, trained and applied as one unit.

use std::fmt;
use std::str::FromStr;

use crate::classifiers::{forest_train, mlp_train, ForestModel, ForestParams, MlpModel, MlpParams, Predictions};
use crate::data::{one_hot, Dataset, ImageSize};
use crate::deep::{argmax_columns, direct_scores, features, train_deep, DeepModel};
use crate::encoder::TrainConfig;
use crate::error::{param, Error, Result};
use crate::eval::EvaluationReport;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierKind {
    /// Argmax of the top mapping `Mᵏ Hᵏ`.
    Direct,
    Nnet,
    Forest,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Nnet => "nnet",
            Self::Forest => "forest",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "nnet" => Ok(Self::Nnet),
            "forest" => Ok(Self::Forest),
            other => Err(param(format!("unknown classifier {other:?} (direct, nnet, forest)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Direct,
    Mlp(MlpModel<f64>),
    Forest(ForestModel<f64>),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Direct => ClassifierKind::Direct,
            Self::Mlp(_) => ClassifierKind::Nnet,
            Self::Forest(_) => ClassifierKind::Forest,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub hidden_dims: Vec<usize>,
    pub train: TrainConfig,
    pub classifier: ClassifierKind,
    /// Hidden widths of the network; its input width is the top code width.
    pub nnet_hidden: Vec<usize>,
    pub nnet_epochs: usize,
    pub nnet_learning_rate: f64,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![768, 768],
            train: TrainConfig::default(),
            classifier: ClassifierKind::Direct,
            nnet_hidden: vec![192, 48],
            nnet_epochs: 1000,
            nnet_learning_rate: 0.1,
            forest_trees: 100,
            forest_max_depth: 16,
        }
    }
}

/// A trained encoder stack, its classifier and the class names it predicts.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub model: DeepModel<f64>,
    pub classifier: Classifier,
    pub class_names: Vec<String>,
    /// Raster size images were resampled to before encoding.
    pub image_size: ImageSize,
    /// Free-form record of the run configuration.
    pub config_echo: String,
}

impl ModelBundle {
    pub fn predict(&self, x: &Matrix<f64>) -> Result<Predictions<f64>> {
        match &self.classifier {
            Classifier::Direct => {
                let scores = direct_scores(&self.model, x)?;
                Ok(Predictions {
                    labels: argmax_columns(&scores),
                    scores: scores.transpose(),
                })
            }
            Classifier::Mlp(net) => net.predict(&features(&self.model, x)?),
            Classifier::Forest(f) => f.predict(&features(&self.model, x)?),
        }
    }

    /// Evaluates on `test`, whose class names must all be known to the model.
    pub fn evaluate(&self, test: &Dataset<f64>) -> Result<EvaluationReport> {
        let test = test.relabel(&self.class_names)?;
        let pred = self.predict(&test.x)?;
        let positive: Option<Vec<f64>> =
            (self.class_names.len() == 2).then(|| pred.scores.column(1));
        EvaluationReport::build(&self.class_names, &test.labels, &pred.labels, positive.as_deref())
    }
}

pub fn train_pipeline(train: &Dataset<f64>, cfg: &PipelineConfig, seed: u64) -> Result<ModelBundle> {
    let c = one_hot(train)?.c;
    let tc = TrainConfig { seed, ..cfg.train };
    let model = train_deep(&train.x, &c, &cfg.hidden_dims, &tc)?;
    let l = train.num_classes();
    let classifier = match cfg.classifier {
        ClassifierKind::Direct => Classifier::Direct,
        ClassifierKind::Nnet => {
            let h = features(&model, &train.x)?;
            let mut dims = vec![h.rows()];
            dims.extend_from_slice(&cfg.nnet_hidden);
            let params = MlpParams {
                dims,
                epochs: cfg.nnet_epochs,
                learning_rate: cfg.nnet_learning_rate,
                seed,
            };
            Classifier::Mlp(mlp_train(&h, &train.labels, l, &params)?)
        }
        ClassifierKind::Forest => {
            let h = features(&model, &train.x)?;
            let params = ForestParams {
                num_trees: cfg.forest_trees,
                max_depth: cfg.forest_max_depth,
                seed,
            };
            Classifier::Forest(forest_train(&h, &train.labels, l, &params)?)
        }
    };
    Ok(ModelBundle {
        model,
        classifier,
        class_names: train.class_names.clone(),
        image_size: ImageSize::default(),
        config_echo: String::new(),
    })
}
