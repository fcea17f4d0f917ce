//! Versioned binary model files.
//!
//! ```text
//! header   magic "DCENCODR" | version u32 | layers u32 | classes u32 | classifier u32
//!          | dims (layers+1) × u64 | payload length u64 | SHA-256 of the bytes above
//! payload  train config | per layer: λ f64, W_e, W_d, M, objective trace
//!          | classifier block | metadata length u64 + UTF-8 JSON
//! trailer  SHA-256 of the payload
//! ```
//!
//! Integers and reals are little-endian; matrices are row-major `f64` with
//! shapes implied by the dimension table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ImageSize;
use crate::classifiers::{DecisionTree, ForestModel, MlpModel, Node};
use crate::deep::{DeepModel, TrainingMeta};
use crate::encoder::{ClassEncoderLayer, TrainConfig, TrainTrace};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::{Classifier, ModelBundle};

pub const MAGIC: &[u8; 8] = b"DCENCODR";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
/// magic + version + layers + classes + classifier tag
const FIXED_HEADER: usize = 8 + 4 * 4;

#[derive(Serialize, Deserialize)]
struct Metadata {
    class_names: Vec<String>,
    image_width: usize,
    image_height: usize,
    config: String,
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn reals(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &Matrix<f64>) {
        self.reals(m.data());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Integrity(format!("unexpected end of data at byte {} (need {n})", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Integrity("size does not fit in memory".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Integrity("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Integrity("matrix size overflow".into()))?;
        Matrix::new(rows, cols, self.reals(n)?).map_err(|e| Error::Integrity(e.to_string()))
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn classifier_tag(c: &Classifier) -> u32 {
    match c {
        Classifier::Direct => 0,
        Classifier::Mlp(_) => 1,
        Classifier::Forest(_) => 2,
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit the format")))
}

/// Serialises a bundle to bytes.
pub fn encode_bundle(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let model = &bundle.model;
    model.validate()?;
    if bundle.class_names.len() != model.num_classes {
        return Err(Error::Format(format!(
            "{} class names for a {}-class model",
            bundle.class_names.len(),
            model.num_classes
        )));
    }

    let mut p = Writer::default();
    let cfg = &model.meta.config;
    p.f64(cfg.lambda);
    p.f64(cfg.eps_ridge);
    p.usize(cfg.max_epochs);
    p.f64(cfg.rel_tol);
    p.u64(cfg.seed);
    p.f64(cfg.init_scale);
    for (i, layer) in model.layers.iter().enumerate() {
        p.f64(layer.lambda);
        p.matrix(&layer.w_e);
        p.matrix(&layer.w_d);
        p.matrix(&layer.m_map);
        match model.meta.traces.get(i) {
            Some(t) => {
                p.u8(1);
                p.u8(t.converged as u8);
                p.u8(t.rank_deficient as u8);
                p.usize(t.objectives.len());
                p.reals(&t.objectives);
            }
            None => p.u8(0),
        }
    }
    match &bundle.classifier {
        Classifier::Direct => {}
        Classifier::Mlp(net) => write_mlp(&mut p, net),
        Classifier::Forest(f) => write_forest(&mut p, f),
    }
    let meta = serde_json::to_vec(&Metadata {
        class_names: bundle.class_names.clone(),
        image_width: bundle.image_size.width,
        image_height: bundle.image_size.height,
        config: bundle.config_echo.clone(),
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    p.usize(meta.len());
    p.buf.extend_from_slice(&meta);

    let mut h = Writer::default();
    h.buf.extend_from_slice(MAGIC);
    h.u32(FORMAT_VERSION);
    h.u32(to_u32(model.depth(), "layer count")?);
    h.u32(to_u32(model.num_classes, "class count")?);
    h.u32(classifier_tag(&bundle.classifier));
    for &d in &model.dims {
        h.usize(d);
    }
    h.usize(p.buf.len());
    let digest = Sha256::digest(&h.buf);
    h.buf.extend_from_slice(&digest);

    let payload_digest = Sha256::digest(&p.buf);
    let mut out = h.buf;
    out.extend_from_slice(&p.buf);
    out.extend_from_slice(&payload_digest);
    Ok(out)
}

fn write_mlp(p: &mut Writer, net: &MlpModel<f64>) {
    p.usize(net.layer_dims.len());
    net.layer_dims.iter().for_each(|&d| p.usize(d));
    p.f64(net.final_loss);
    p.reals(&net.input_mean);
    p.reals(&net.input_scale);
    for (w, b) in net.weights.iter().zip(&net.biases) {
        p.matrix(w);
        p.reals(b);
    }
}

fn read_mlp(r: &mut Reader) -> Result<MlpModel<f64>> {
    let count = r.usize()?;
    if !(2..=1024).contains(&count) {
        return Err(Error::Integrity(format!("implausible network depth {count}")));
    }
    let layer_dims = (0..count).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let final_loss = r.f64()?;
    let input_mean = r.reals(layer_dims[0])?;
    let input_scale = r.reals(layer_dims[0])?;
    let mut weights = Vec::with_capacity(count - 1);
    let mut biases = Vec::with_capacity(count - 1);
    for w in layer_dims.windows(2) {
        weights.push(r.matrix(w[1], w[0])?);
        biases.push(r.reals(w[1])?);
    }
    Ok(MlpModel { layer_dims, weights, biases, input_mean, input_scale, final_loss })
}

fn write_forest(p: &mut Writer, f: &ForestModel<f64>) {
    p.usize(f.num_trees);
    p.usize(f.max_depth);
    p.usize(f.feature_subsample);
    p.usize(f.num_features);
    p.usize(f.num_classes);
    for tree in &f.trees {
        p.usize(tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Leaf { distribution } => {
                    p.u8(0);
                    p.reals(distribution);
                }
                Node::Split { feature, threshold, left, right } => {
                    p.u8(1);
                    p.usize(*feature);
                    p.f64(*threshold);
                    p.usize(*left);
                    p.usize(*right);
                }
            }
        }
    }
}

fn read_forest(r: &mut Reader) -> Result<ForestModel<f64>> {
    let num_trees = r.usize()?;
    let max_depth = r.usize()?;
    let feature_subsample = r.usize()?;
    let num_features = r.usize()?;
    let num_classes = r.usize()?;
    let remaining = r.buf.len() - r.pos;
    if num_trees > remaining || num_classes > remaining {
        return Err(Error::Integrity("forest header exceeds file size".into()));
    }
    let mut trees = Vec::with_capacity(num_trees);
    for _ in 0..num_trees {
        let count = r.usize()?;
        if count > r.buf.len() - r.pos {
            return Err(Error::Integrity("tree node count exceeds file size".into()));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            nodes.push(match r.u8()? {
                0 => Node::Leaf { distribution: r.reals(num_classes)? },
                1 => Node::Split {
                    feature: r.usize()?,
                    threshold: r.f64()?,
                    left: r.usize()?,
                    right: r.usize()?,
                },
                t => return Err(Error::Integrity(format!("unknown tree node tag {t}"))),
            });
        }
        trees.push(DecisionTree { nodes });
    }
    let f = ForestModel { trees, num_trees, max_depth, feature_subsample, num_features, num_classes };
    f.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    Ok(f)
}

/// Parses bytes produced by [`encode_bundle`].
pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Integrity(format!("file is {} bytes, too short for a header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic; not a model file".into()));
    }
    let mut r = Reader { buf: bytes, pos: 8 };
    let version = r.u32()?;
    let layers = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let tag = r.u32()?;
    if layers == 0 || layers > 4096 {
        return Err(Error::Format(format!("implausible layer count {layers}")));
    }
    // A damaged count can push the table past the end of the file; that is still
    // a header defect, not truncation.
    let as_format = |e: Error| Error::Format(format!("corrupt header: {e}"));
    let dims = (0..=layers).map(|_| r.usize()).collect::<Result<Vec<_>>>().map_err(as_format)?;
    let payload_len = r.usize().map_err(as_format)?;
    let header_end = r.pos;
    let stored = r.take(DIGEST_LEN).map_err(as_format)?;
    if Sha256::digest(&bytes[..header_end]).as_slice() != stored {
        return Err(Error::Format("header checksum mismatch".into()));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let body_start = r.pos;
    let expected = body_start
        .checked_add(payload_len)
        .and_then(|v| v.checked_add(DIGEST_LEN))
        .ok_or_else(|| Error::Integrity("payload length overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Integrity(format!(
            "file is {} bytes, header announces {expected}",
            bytes.len()
        )));
    }
    let payload = &bytes[body_start..body_start + payload_len];
    if Sha256::digest(payload).as_slice() != &bytes[body_start + payload_len..] {
        return Err(Error::Integrity("payload checksum mismatch".into()));
    }

    let mut r = Reader { buf: payload, pos: 0 };
    let config = TrainConfig {
        lambda: r.f64()?,
        eps_ridge: r.f64()?,
        max_epochs: r.usize()?,
        rel_tol: r.f64()?,
        seed: r.u64()?,
        init_scale: r.f64()?,
    };
    let mut model_layers = Vec::with_capacity(layers);
    let mut traces = Vec::with_capacity(layers);
    for i in 0..layers {
        let (m, h) = (dims[i], dims[i + 1]);
        let lambda = r.f64()?;
        let w_e = r.matrix(h, m)?;
        let w_d = r.matrix(m, h)?;
        let m_map = r.matrix(classes, h)?;
        model_layers.push(ClassEncoderLayer { w_e, w_d, m_map, lambda });
        if r.u8()? == 1 {
            let converged = r.u8()? != 0;
            let rank_deficient = r.u8()? != 0;
            let n = r.usize()?;
            traces.push(TrainTrace { objectives: r.reals(n)?, converged, rank_deficient });
        }
    }
    let classifier = match tag {
        0 => Classifier::Direct,
        1 => Classifier::Mlp(read_mlp(&mut r)?),
        2 => Classifier::Forest(read_forest(&mut r)?),
        t => return Err(Error::Format(format!("unknown classifier tag {t}"))),
    };
    let meta_len = r.usize()?;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| Error::Integrity(format!("metadata: {e}")))?;
    if !r.done() {
        return Err(Error::Integrity("trailing bytes after metadata".into()));
    }
    let model = DeepModel {
        layers: model_layers,
        dims,
        num_classes: classes,
        meta: TrainingMeta { traces, config },
    };
    model.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    if meta.class_names.len() != classes {
        return Err(Error::Integrity("class name count does not match header".into()));
    }
    Ok(ModelBundle {
        model,
        classifier,
        class_names: meta.class_names,
        image_size: ImageSize { width: meta.image_width, height: meta.image_height },
        config_echo: meta.config,
    })
}

pub fn save_model(path: &Path, bundle: &ModelBundle) -> Result<()> {
    std::fs::write(path, encode_bundle(bundle)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    decode_bundle(&std::fs::read(path)?)
}
