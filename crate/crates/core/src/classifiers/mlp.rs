//! Fully connected network with logistic hidden units and a softmax readout,
//! trained by full-batch gradient descent on cross-entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{argmax_rows, check_labels, Predictions};
use crate::error::{param, Error, Result};
use crate::matrix::{matmul, matmul_nt, matmul_tn, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    /// Input width followed by hidden widths; the `l`-way output layer is appended.
    pub dims: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            dims: vec![768, 192, 48],
            epochs: 1000,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Trained network. Inputs are standardised with the training mean and
/// standard deviation before the first layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel<T> {
    /// Input, hidden and output widths.
    pub layer_dims: Vec<usize>,
    /// `weights[i]` is `layer_dims[i+1] × layer_dims[i]`.
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
    pub input_mean: Vec<T>,
    pub input_scale: Vec<T>,
    /// Training cross-entropy after the last epoch.
    pub final_loss: T,
}

/// Per-layer gradients, same layout as the model's weights and biases.
#[derive(Clone, Debug)]
pub struct MlpGradients<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

fn logistic<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Column-wise softmax in place.
fn softmax_columns<T: Scalar>(a: &mut Matrix<T>) {
    for j in 0..a.cols() {
        let mut top = T::neg_infinity();
        for i in 0..a.rows() {
            top = top.max(a[(i, j)]);
        }
        let mut total = T::zero();
        for i in 0..a.rows() {
            let e = (a[(i, j)] - top).exp();
            a[(i, j)] = e;
            total += e;
        }
        for i in 0..a.rows() {
            a[(i, j)] /= total;
        }
    }
}

impl<T: Scalar> MlpModel<T> {
    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().expect("at least input and output")
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn standardize(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.rows() != self.input_dim() {
            return Err(Error::Shape {
                op: "mlp input",
                left: x.shape(),
                right: (self.input_dim(), x.cols()),
            });
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| {
            (x[(i, j)] - self.input_mean[i]) / self.input_scale[i]
        }))
    }

    /// Activations of every layer, the standardised input first.
    fn forward(&self, x: &Matrix<T>) -> Result<Vec<Matrix<T>>> {
        let mut acts = vec![self.standardize(x)?];
        let last = self.weights.len() - 1;
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = matmul(w, acts.last().unwrap())?;
            for i in 0..z.rows() {
                let bi = b[i];
                z.row_mut(i).iter_mut().for_each(|v| *v += bi);
            }
            if k == last {
                softmax_columns(&mut z);
            } else {
                z = z.map(logistic);
            }
            acts.push(z);
        }
        Ok(acts)
    }

    fn cross_entropy(probs: &Matrix<T>, labels: &[usize]) -> T {
        // An underflowed true-class probability gives an infinite loss, read as divergence.
        let n = T::lit(labels.len() as f64);
        -labels
            .iter()
            .enumerate()
            .map(|(j, &y)| probs[(y, j)].ln())
            .sum::<T>()
            / n
    }

    /// Mean cross-entropy of the network on `(features, labels)`.
    pub fn loss(&self, features: &Matrix<T>, labels: &[usize]) -> Result<T> {
        check_labels(labels, features.cols(), self.num_classes())?;
        let acts = self.forward(features)?;
        Ok(Self::cross_entropy(acts.last().unwrap(), labels))
    }

    /// Loss and its exact gradient by backpropagation.
    pub fn loss_and_gradients(
        &self,
        features: &Matrix<T>,
        labels: &[usize],
    ) -> Result<(T, MlpGradients<T>)> {
        check_labels(labels, features.cols(), self.num_classes())?;
        let acts = self.forward(features)?;
        let probs = acts.last().unwrap();
        let loss = Self::cross_entropy(probs, labels);

        let inv_n = T::one() / T::lit(labels.len() as f64);
        let mut delta = probs.clone();
        for (j, &y) in labels.iter().enumerate() {
            delta[(y, j)] -= T::one();
        }
        delta = delta.scale(inv_n);

        let depth = self.weights.len();
        let mut g_w = Vec::with_capacity(depth);
        let mut g_b = Vec::with_capacity(depth);
        for k in (0..depth).rev() {
            g_w.push(matmul_nt(&delta, &acts[k])?);
            g_b.push((0..delta.rows()).map(|i| delta.row(i).iter().copied().sum()).collect());
            if k > 0 {
                let back = matmul_tn(&self.weights[k], &delta)?;
                let a = &acts[k];
                delta = Matrix::from_fn(back.rows(), back.cols(), |i, j| {
                    let s = a[(i, j)];
                    back[(i, j)] * s * (T::one() - s)
                });
            }
        }
        g_w.reverse();
        g_b.reverse();
        Ok((loss, MlpGradients { weights: g_w, biases: g_b }))
    }

    /// Per-class probabilities (`n × l`, rows sum to one) and argmax labels.
    pub fn predict(&self, features: &Matrix<T>) -> Result<Predictions<T>> {
        let acts = self.forward(features)?;
        let scores = acts.last().unwrap().transpose();
        Ok(Predictions {
            labels: argmax_rows(&scores),
            scores,
        })
    }
}

/// Builds an untrained network: Gaussian weights with variance `1/fan_in`, zero biases.
pub fn mlp_init<T: Scalar>(
    features: &Matrix<T>,
    num_classes: usize,
    params: &MlpParams,
) -> Result<MlpModel<T>> {
    if params.dims.is_empty() || params.dims.iter().any(|&d| d == 0) {
        return Err(param(format!("invalid network widths {:?}", params.dims)));
    }
    if params.dims[0] != features.rows() {
        return Err(Error::Shape {
            op: "mlp_train",
            left: features.shape(),
            right: (params.dims[0], features.cols()),
        });
    }
    if features.cols() == 0 {
        return Err(param("mlp_train needs at least one sample"));
    }
    if num_classes == 0 {
        return Err(param("mlp_train needs at least one class"));
    }
    let mut layer_dims = params.dims.clone();
    layer_dims.push(num_classes);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let weights = layer_dims
        .windows(2)
        .map(|w| {
            let sd = 1.0 / (w[0] as f64).sqrt();
            Matrix::from_fn(w[1], w[0], |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z * sd)
            })
        })
        .collect();
    let biases = layer_dims[1..].iter().map(|&d| vec![T::zero(); d]).collect();

    let n = T::lit(features.cols() as f64);
    let mut input_mean = Vec::with_capacity(features.rows());
    let mut input_scale = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        let row = features.row(i);
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        input_mean.push(mean);
        input_scale.push(if sd > T::lit(1e-12) { sd } else { T::one() });
    }

    Ok(MlpModel {
        layer_dims,
        weights,
        biases,
        input_mean,
        input_scale,
        final_loss: T::nan(),
    })
}

pub fn mlp_train<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    num_classes: usize,
    params: &MlpParams,
) -> Result<MlpModel<T>> {
    if features.cols() == 0 || labels.is_empty() {
        return Err(param("mlp_train needs at least one sample"));
    }
    check_labels(labels, features.cols(), num_classes)?;
    if !(params.learning_rate > 0.0) {
        return Err(param(format!("learning rate must be positive, got {}", params.learning_rate)));
    }
    let mut model = mlp_init(features, num_classes, params)?;
    let lr = T::lit(params.learning_rate);
    for epoch in 0..params.epochs {
        let (loss, grads) = model.loss_and_gradients(features, labels)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("mlp loss diverged at epoch {epoch}")));
        }
        for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
            *w = w.add_scaled(g, -lr)?;
        }
        for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
            b.iter_mut().zip(g).for_each(|(bi, &gi)| *bi -= lr * gi);
        }
    }
    let loss = model.loss(features, labels)?;
    if !loss.is_finite() || !model.weights.iter().all(Matrix::is_finite) {
        return Err(Error::Numerical("mlp training produced non-finite parameters".into()));
    }
    model.final_loss = loss;
    Ok(model)
}
