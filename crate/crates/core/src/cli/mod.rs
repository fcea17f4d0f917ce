//! Subcommand implementations behind the `dce` binary. Each command writes its
//! human-readable output to the supplied sink so it can be exercised in tests.

mod config;

pub use config::{ClassifierName, RunConfig, SplitKind};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use crate::data::{
    load_data, split_stratified, split_stratified_balanced, split_subject_disjoint, synth_blobs,
    write_table, Dataset, ImageSize,
};
use crate::deep::features;
use crate::eval::EvaluationReport;
use crate::model_file::{load_model, save_model, FORMAT_VERSION};
use crate::pipeline::{train_pipeline, Classifier, ClassifierKind, ModelBundle};

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub classifier: Option<ClassifierKind>,
    pub model_out: Option<PathBuf>,
}

fn load_dataset(path: &Path, size: ImageSize) -> Result<Dataset<f64>> {
    load_data(path, size).with_context(|| format!("data: loading {}", path.display()))
}

fn obtain_data(cfg: &RunConfig) -> Result<Dataset<f64>> {
    match (cfg.blob_spec(), &cfg.data) {
        (Some(spec), _) => synth_blobs(&spec).context("data: generating synthetic blobs"),
        (None, Some(path)) => load_dataset(path, cfg.image_size()),
        (None, None) => anyhow::bail!("config: no data source"),
    }
}

/// Applies the configured protocol; the test side is `None` for `split = "none"`.
fn split_data(cfg: &RunConfig, all: Dataset<f64>, seed: u64) -> Result<(Dataset<f64>, Option<Dataset<f64>>)> {
    let f = cfg.train_fraction;
    let (train, test) = match cfg.split {
        SplitKind::Stratified if cfg.balanced => split_stratified_balanced(&all, f, seed),
        SplitKind::Stratified => split_stratified(&all, f, seed),
        SplitKind::SubjectDisjoint => split_subject_disjoint(&all, f, seed),
        SplitKind::ManifestPair => {
            let path = cfg.test_data.as_ref().context("config: manifest_pair needs test_data")?;
            let test = load_dataset(path, cfg.image_size())?;
            return Ok((all, Some(test)));
        }
        SplitKind::None => return Ok((all, None)),
    }
    .context("data: splitting")?;
    Ok((train, Some(test)))
}

/// Writes `path` (text), and `.json` / `.roc` siblings.
pub fn write_report(path: &Path, report: &EvaluationReport) -> Result<()> {
    std::fs::write(path, report.render_text())
        .with_context(|| format!("evaluation: writing {}", path.display()))?;
    let json = serde_json::to_string_pretty(report).context("evaluation: serialising report")?;
    std::fs::write(path.with_extension("json"), json + "\n")
        .with_context(|| format!("evaluation: writing {}", path.with_extension("json").display()))?;
    if let Some(roc) = report.render_roc() {
        std::fs::write(path.with_extension("roc"), roc)
            .with_context(|| format!("evaluation: writing {}", path.with_extension("roc").display()))?;
    }
    Ok(())
}

/// Trains from a config file, writes the model and, when a held-out side
/// exists, evaluates it.
pub fn cmd_train(config_path: &Path, overrides: &TrainOverrides, out: &mut dyn Write) -> Result<ModelBundle> {
    let mut cfg = RunConfig::load(config_path)
        .with_context(|| format!("config: reading {}", config_path.display()))?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = overrides.classifier {
        cfg.classifier = kind.into();
    }
    if let Some(path) = &overrides.model_out {
        cfg.model_out = path.clone();
    }
    cfg.validate().context("config")?;

    let all = obtain_data(&cfg)?;
    let (train, test) = split_data(&cfg, all, cfg.seed)?;
    writeln!(
        out,
        "training on {} samples ({} classes, dimension {}), {} held out",
        train.len(),
        train.num_classes(),
        train.dim(),
        test.as_ref().map_or(0, Dataset::len)
    )?;

    let started = Instant::now();
    let mut bundle = train_pipeline(&train, &cfg.pipeline(), cfg.seed).context("training")?;
    let elapsed = started.elapsed();
    bundle.image_size = cfg.image_size();
    bundle.config_echo = cfg.to_toml();

    for (i, trace) in bundle.model.meta.traces.iter().enumerate() {
        let objs: Vec<String> = trace.objectives.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(out, "layer {} objective trace: {}", i + 1, objs.join(" "))?;
        writeln!(
            out,
            "layer {} final objective {:.6e} after {} epochs{}{}",
            i + 1,
            trace.final_objective().unwrap_or(f64::NAN),
            trace.epochs(),
            if trace.converged { " (converged)" } else { "" },
            if trace.rank_deficient { " [fewer samples than hidden units]" } else { "" }
        )?;
    }
    writeln!(out, "training wall time {:.3} s", elapsed.as_secs_f64())?;

    save_model(&cfg.model_out, &bundle)
        .with_context(|| format!("model file: writing {}", cfg.model_out.display()))?;
    writeln!(out, "model written to {}", cfg.model_out.display())?;

    if let Some(test) = test {
        let report = bundle.evaluate(&test).context("evaluation")?;
        writeln!(
            out,
            "held-out mean class-wise accuracy (%): {:.2}",
            100.0 * report.mean_classwise_accuracy
        )?;
        if let Some(path) = &cfg.report {
            write_report(path, &report)?;
            writeln!(out, "report written to {}", path.display())?;
        }
    }
    Ok(bundle)
}

pub fn cmd_evaluate(model: &Path, data: &Path, report_path: &Path, out: &mut dyn Write) -> Result<EvaluationReport> {
    let bundle = load_model(model).with_context(|| format!("model file: reading {}", model.display()))?;
    let test = load_dataset(data, bundle.image_size)?;
    let report = bundle.evaluate(&test).context("evaluation")?;
    write_report(report_path, &report)?;
    out.write_all(report.render_text().as_bytes())?;
    Ok(report)
}

/// Writes top-layer codes as a numeric table, one record per sample.
pub fn cmd_encode(model: &Path, data: &Path, out_path: &Path, out: &mut dyn Write) -> Result<Dataset<f64>> {
    let bundle = load_model(model).with_context(|| format!("model file: reading {}", model.display()))?;
    let ds = load_dataset(data, bundle.image_size)?;
    let codes = features(&bundle.model, &ds.x).context("encoding")?;
    let encoded = Dataset::new(codes, ds.labels, ds.subjects, ds.class_names).context("encoding")?;
    write_table(out_path, &encoded).with_context(|| format!("encoding: writing {}", out_path.display()))?;
    writeln!(
        out,
        "{} samples encoded to {} features in {}",
        encoded.len(),
        encoded.dim(),
        out_path.display()
    )?;
    Ok(encoded)
}

/// Writes the config's synthetic blobs as a numeric table.
pub fn cmd_synth(config_path: &Path, seed: Option<u64>, out_path: &Path, out: &mut dyn Write) -> Result<Dataset<f64>> {
    let cfg = RunConfig::load(config_path)
        .with_context(|| format!("config: reading {}", config_path.display()))?;
    let mut spec = cfg.blob_spec().context("config: synth needs `synth_classes`")?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let ds = synth_blobs(&spec).context("data: generating synthetic blobs")?;
    write_table(out_path, &ds).with_context(|| format!("data: writing {}", out_path.display()))?;
    writeln!(out, "{} samples of dimension {} written to {}", ds.len(), ds.dim(), out_path.display())?;
    Ok(ds)
}

pub fn cmd_inspect(model: &Path, out: &mut dyn Write) -> Result<ModelBundle> {
    let bundle = load_model(model).with_context(|| format!("model file: reading {}", model.display()))?;
    let m = &bundle.model;
    writeln!(out, "format version: {FORMAT_VERSION}")?;
    writeln!(out, "dims: {:?}", m.dims)?;
    for (i, layer) in m.layers.iter().enumerate() {
        let trace = m.meta.traces.get(i);
        writeln!(
            out,
            "layer {}: {} -> {}, lambda {}{}",
            i + 1,
            layer.input_dim(),
            layer.hidden_dim(),
            layer.lambda,
            trace.map_or(String::new(), |t| format!(
                ", final objective {:.6e} after {} epochs",
                t.final_objective().unwrap_or(f64::NAN),
                t.epochs()
            ))
        )?;
    }
    writeln!(out, "classes: {}", bundle.class_names.join(", "))?;
    let classifier = match &bundle.classifier {
        Classifier::Direct => "direct".to_string(),
        Classifier::Mlp(net) => format!("nnet, layers {:?}", net.layer_dims),
        Classifier::Forest(f) => format!("forest, {} trees, max depth {}", f.num_trees, f.max_depth),
    };
    writeln!(out, "classifier: {classifier}")?;
    writeln!(out, "image size: {}x{}", bundle.image_size.width, bundle.image_size.height)?;
    if !bundle.config_echo.is_empty() {
        writeln!(out, "config:\n{}", bundle.config_echo.trim_end())?;
    }
    Ok(bundle)
}
