//! Run configuration: a flat TOML file whose keys mirror [`RunConfig`].
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{BlobSpec, ImageSize};
use crate::encoder::TrainConfig;
use crate::error::{param, Result};
use crate::pipeline::{ClassifierKind, PipelineConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Stratified,
    SubjectDisjoint,
    /// Train on `data`, test on `test_data`.
    ManifestPair,
    /// Train on everything, no held-out evaluation.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierName {
    Direct,
    Nnet,
    Forest,
}

impl From<ClassifierName> for ClassifierKind {
    fn from(c: ClassifierName) -> Self {
        match c {
            ClassifierName::Direct => Self::Direct,
            ClassifierName::Nnet => Self::Nnet,
            ClassifierName::Forest => Self::Forest,
        }
    }
}

impl From<ClassifierKind> for ClassifierName {
    fn from(c: ClassifierKind) -> Self {
        match c {
            ClassifierKind::Direct => Self::Direct,
            ClassifierKind::Nnet => Self::Nnet,
            ClassifierKind::Forest => Self::Forest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Image manifest or numeric table.
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,

    /// Generate blobs instead of reading `data` when set.
    pub synth_classes: Option<usize>,
    pub synth_dim: usize,
    pub synth_per_class: usize,
    pub synth_separation: f64,
    pub synth_noise: f64,
    pub synth_seed: u64,
    pub synth_images_per_subject: Option<usize>,

    pub resize_width: usize,
    pub resize_height: usize,

    pub hidden_dims: Vec<usize>,
    pub lambda: f64,
    pub eps_ridge: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init_scale: f64,

    pub classifier: ClassifierName,
    pub nnet_hidden: Vec<usize>,
    pub nnet_epochs: usize,
    pub nnet_learning_rate: f64,
    pub forest_trees: usize,
    pub forest_max_depth: usize,

    pub split: SplitKind,
    pub train_fraction: f64,
    /// Cap every class's training share at the minority class's (stratified only).
    pub balanced: bool,

    pub model_out: PathBuf,
    /// Held-out report; `.json` and `.roc` siblings are written next to it.
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let p = PipelineConfig::default();
        let size = ImageSize::default();
        Self {
            data: None,
            test_data: None,
            synth_classes: None,
            synth_dim: 64,
            synth_per_class: 100,
            synth_separation: 5.0,
            synth_noise: 1.0,
            synth_seed: 0,
            synth_images_per_subject: None,
            resize_width: size.width,
            resize_height: size.height,
            hidden_dims: p.hidden_dims,
            lambda: t.lambda,
            eps_ridge: t.eps_ridge,
            max_epochs: t.max_epochs,
            rel_tol: t.rel_tol,
            seed: t.seed,
            init_scale: t.init_scale,
            classifier: p.classifier.into(),
            nnet_hidden: p.nnet_hidden,
            nnet_epochs: p.nnet_epochs,
            nnet_learning_rate: p.nnet_learning_rate,
            forest_trees: p.forest_trees,
            forest_max_depth: p.forest_max_depth,
            split: SplitKind::Stratified,
            train_fraction: 0.7,
            balanced: false,
            model_out: PathBuf::from("model.dce"),
            report: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.as_mut().map(fix);
        cfg.test_data.as_mut().map(fix);
        cfg.report.as_mut().map(fix);
        fix(&mut cfg.model_out);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(param(format!("hidden_dims must be positive, got {:?}", self.hidden_dims)));
        }
        if self.nnet_hidden.contains(&0) {
            return Err(param("nnet_hidden widths must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(param(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if self.resize_width == 0 || self.resize_height == 0 {
            return Err(param("resize dimensions must be positive"));
        }
        if self.synth_classes.is_none() && self.data.is_none() {
            return Err(param("config needs either `data` or `synth_classes`"));
        }
        if self.split == SplitKind::ManifestPair && self.test_data.is_none() {
            return Err(param("split = \"manifest_pair\" needs `test_data`"));
        }
        let mut paths: Vec<&PathBuf> = [&self.data, &self.test_data, &self.report]
            .into_iter()
            .flatten()
            .collect();
        paths.push(&self.model_out);
        for (i, a) in paths.iter().enumerate() {
            if paths[..i].contains(a) {
                return Err(param(format!("path {} is used twice in the config", a.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            eps_ridge: self.eps_ridge,
            max_epochs: self.max_epochs,
            rel_tol: self.rel_tol,
            seed: self.seed,
            init_scale: self.init_scale,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            hidden_dims: self.hidden_dims.clone(),
            train: self.train_config(),
            classifier: self.classifier.into(),
            nnet_hidden: self.nnet_hidden.clone(),
            nnet_epochs: self.nnet_epochs,
            nnet_learning_rate: self.nnet_learning_rate,
            forest_trees: self.forest_trees,
            forest_max_depth: self.forest_max_depth,
        }
    }

    pub fn image_size(&self) -> ImageSize {
        ImageSize {
            width: self.resize_width,
            height: self.resize_height,
        }
    }

    pub fn blob_spec(&self) -> Option<BlobSpec> {
        self.synth_classes.map(|classes| BlobSpec {
            n_per_class: self.synth_per_class,
            dim: self.synth_dim,
            classes,
            separation: self.synth_separation,
            noise: self.synth_noise,
            seed: self.synth_seed,
            images_per_subject: self.synth_images_per_subject,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let cfg = RunConfig::parse(
            r#"
            data = "train.csv"
            hidden_dims = [768, 768]
            lambda = 1.0
            classifier = "forest"
            split = "subject_disjoint"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.hidden_dims, vec![768, 768]);
        assert_eq!(cfg.classifier, ClassifierName::Forest);
        assert_eq!(cfg.split, SplitKind::SubjectDisjoint);
        assert_eq!(cfg.max_epochs, 200);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = RunConfig::parse("data = \"a.csv\"\nlamda = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("data = \"a.csv\"\ntrain_fraction = 1.0\n").is_err());
        assert!(RunConfig::parse("data = \"a.csv\"\nhidden_dims = []\n").is_err());
        assert!(RunConfig::parse("hidden_dims = [4]\n").is_err());
        assert!(RunConfig::parse("data = \"a.csv\"\nmodel_out = \"a.csv\"\n").is_err());
        assert!(RunConfig::parse("data = \"a.csv\"\nsplit = \"manifest_pair\"\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig { synth_classes: Some(3), ..Default::default() };
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
