//! Single-layer Class-Encoder.
//!
//! A linear autoencoder `X ≈ W_d W_e X` whose code `H = W_e X` is also asked to
//! reproduce the one-hot label matrix through a mapping `C ≈ M H`. The joint
//! objective
//!
//! ```text
//! ‖X − W_d W_e X‖² + λ ‖C − M W_e X‖²
//! ```
//!
//! is minimised by cycling exact closed-form solves over the three blocks
//! (decoder, mapping, encoder). No gradients are evaluated during training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::matrix::{matmul, matmul_nt, matmul_tn, ridge_right_solve, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Weights of one Class-Encoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassEncoderLayer<T> {
    /// Encoder, `h × m`.
    pub w_e: Matrix<T>,
    /// Decoder, `m × h`.
    pub w_d: Matrix<T>,
    /// Label mapping, `l × h`.
    pub m_map: Matrix<T>,
    pub lambda: T,
}

impl<T: Scalar> ClassEncoderLayer<T> {
    pub fn input_dim(&self) -> usize {
        self.w_e.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_e.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.m_map.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, m) = self.w_e.shape();
        if self.w_d.shape() != (m, h) {
            return Err(Error::Shape {
                op: "layer decoder",
                left: self.w_e.shape(),
                right: self.w_d.shape(),
            });
        }
        if self.m_map.cols() != h {
            return Err(Error::Shape {
                op: "layer mapping",
                left: self.w_e.shape(),
                right: self.m_map.shape(),
            });
        }
        if !(self.lambda >= T::zero()) {
            return Err(param(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.w_e.is_finite() && self.w_d.is_finite() && self.m_map.is_finite()) {
            return Err(Error::Numerical("layer weights contain non-finite entries".into()));
        }
        Ok(())
    }
}

/// Hyperparameters of [`train_layer`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Ridge added to every Gram matrix before it is factored.
    pub eps_ridge: f64,
    pub max_epochs: usize,
    /// Stop once `|Δobjective| / objective` drops below this.
    pub rel_tol: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eps_ridge: 1e-6,
            max_epochs: 200,
            rel_tol: 1e-7,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_ridge > 0.0) || !self.eps_ridge.is_finite() {
            return Err(param(format!("eps_ridge must be positive, got {}", self.eps_ridge)));
        }
        if self.max_epochs == 0 {
            return Err(param("max_epochs must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(param(format!("rel_tol must be non-negative, got {}", self.rel_tol)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(param(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(param(format!("init_scale must be non-negative, got {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Per-epoch record of one [`train_layer`] run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace<T> {
    /// Objective after each completed epoch.
    pub objectives: Vec<T>,
    /// Whether the relative-change criterion fired before `max_epochs`.
    pub converged: bool,
    /// Fewer samples than hidden units: the Gram matrices are singular before the ridge.
    pub rank_deficient: bool,
}

impl<T: Scalar> TrainTrace<T> {
    pub fn final_objective(&self) -> Option<T> {
        self.objectives.last().copied()
    }

    pub fn epochs(&self) -> usize {
        self.objectives.len()
    }
}

/// Seeded Gaussian initialisation: `W_e ~ N(0, init_scale²/m)`,
/// `W_d ~ N(0, init_scale²/h)`, `M = 0`.
pub fn init_weights<T: Scalar>(
    m: usize,
    h: usize,
    classes: usize,
    config: &TrainConfig,
) -> Result<ClassEncoderLayer<T>> {
    if m == 0 || h == 0 || classes == 0 {
        return Err(param(format!(
            "layer dimensions must be positive (m={m}, h={h}, classes={classes})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let se = config.init_scale / (m as f64).sqrt();
    let sd = config.init_scale / (h as f64).sqrt();
    let mut draw = |s: f64| {
        let z: f64 = StandardNormal.sample(&mut rng);
        T::lit(z * s)
    };
    let w_e = Matrix::from_fn(h, m, |_, _| draw(se));
    let w_d = Matrix::from_fn(m, h, |_, _| draw(sd));
    Ok(ClassEncoderLayer {
        w_e,
        w_d,
        m_map: Matrix::zeros(classes, h),
        lambda: T::lit(config.lambda),
    })
}

fn check_data<T: Scalar>(x: &Matrix<T>, c: &Matrix<T>, w: &ClassEncoderLayer<T>) -> Result<()> {
    if x.rows() != w.input_dim() {
        return Err(Error::Shape {
            op: "class-encoder input",
            left: x.shape(),
            right: w.w_e.shape(),
        });
    }
    if c.cols() != x.cols() || c.rows() != w.num_classes() {
        return Err(Error::Shape {
            op: "class-encoder labels",
            left: c.shape(),
            right: x.shape(),
        });
    }
    Ok(())
}

/// `H = W_e X` (unit activation).
pub fn encode<T: Scalar>(w: &ClassEncoderLayer<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    matmul(&w.w_e, x)
}

/// `‖X − W_d W_e X‖² + λ‖C − M W_e X‖²`
pub fn objective<T: Scalar>(x: &Matrix<T>, c: &Matrix<T>, w: &ClassEncoderLayer<T>) -> Result<T> {
    check_data(x, c, w)?;
    let h = encode(w, x)?;
    objective_from_code(x, c, w, &h)
}

fn objective_from_code<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    w: &ClassEncoderLayer<T>,
    h: &Matrix<T>,
) -> Result<T> {
    let recon = x.dist_sq(&matmul(&w.w_d, h)?)?;
    if w.lambda == T::zero() {
        return Ok(recon);
    }
    Ok(recon + w.lambda * c.dist_sq(&matmul(&w.m_map, h)?)?)
}

/// Objective plus the ridge terms `eps(‖W_d‖² + ‖M‖² + ‖W_e‖²)`.
pub fn regularized_objective<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    w: &ClassEncoderLayer<T>,
    eps: T,
) -> Result<T> {
    Ok(objective(x, c, w)?
        + eps * (w.w_d.frobenius_norm_sq() + w.m_map.frobenius_norm_sq() + w.w_e.frobenius_norm_sq()))
}

/// Gradients of [`objective`] with respect to `(W_e, W_d, M)`.
pub fn objective_gradients<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    w: &ClassEncoderLayer<T>,
) -> Result<(Matrix<T>, Matrix<T>, Matrix<T>)> {
    check_data(x, c, w)?;
    let two = T::lit(2.0);
    let h = encode(w, x)?;
    let r = x.sub(&matmul(&w.w_d, &h)?)?;
    let e = c.sub(&matmul(&w.m_map, &h)?)?;
    let g_d = matmul_nt(&r, &h)?.scale(-two);
    let g_m = matmul_nt(&e, &h)?.scale(-two * w.lambda);
    let back = matmul_tn(&w.w_d, &r)?.add_scaled(&matmul_tn(&w.m_map, &e)?, w.lambda)?;
    let g_e = matmul_nt(&back, x)?.scale(-two);
    Ok((g_e, g_d, g_m))
}

/// `argmin_W ‖X − W H‖² + eps‖W‖²`
pub fn update_decoder<T: Scalar>(x: &Matrix<T>, h_rep: &Matrix<T>, eps: T) -> Result<Matrix<T>> {
    if x.cols() != h_rep.cols() || x.cols() == 0 {
        return Err(Error::Shape {
            op: "update_decoder",
            left: x.shape(),
            right: h_rep.shape(),
        });
    }
    ridge_right_solve(&matmul_nt(h_rep, h_rep)?, &matmul_nt(x, h_rep)?, eps)
}

/// `argmin_M ‖C − M H‖² + eps‖M‖²`
pub fn update_mapping<T: Scalar>(c: &Matrix<T>, h_rep: &Matrix<T>, eps: T) -> Result<Matrix<T>> {
    if c.cols() != h_rep.cols() || c.cols() == 0 {
        return Err(Error::Shape {
            op: "update_mapping",
            left: c.shape(),
            right: h_rep.shape(),
        });
    }
    ridge_right_solve(&matmul_nt(h_rep, h_rep)?, &matmul_nt(c, h_rep)?, eps)
}

/// Data-side factor of the encoder solve, fixed while a layer trains.
///
/// With `B = X Xᵀ + eps·I` the encoder right-hand side is
/// `(W_dᵀ X + λ Mᵀ C) Xᵀ B⁻¹`. The trailing `Xᵀ B⁻¹` is formed once, either as
/// `X Xᵀ B⁻¹` and `C Xᵀ B⁻¹` (`m × m`, `l × m`) or, when samples are fewer than
/// inputs, as `(XᵀX + eps·I)⁻¹ Xᵀ` (`n × m`), which is the same matrix.
enum DataFactor<T> {
    Gram { input: Matrix<T>, labels: Matrix<T> },
    Samples(Matrix<T>),
}

struct EncoderSystem<'a, T> {
    x: &'a Matrix<T>,
    c: &'a Matrix<T>,
    factor: DataFactor<T>,
}

impl<'a, T: Scalar> EncoderSystem<'a, T> {
    fn new(x: &'a Matrix<T>, c: &'a Matrix<T>, eps: T) -> Result<Self> {
        let fail = |e: Error| Error::Numerical(format!("update_encoder: data Gram solve: {e}"));
        let factor = if x.cols() < x.rows() {
            let gram = Cholesky::factor(&matmul_tn(x, x)?.add_diagonal(eps)?).map_err(fail)?;
            DataFactor::Samples(gram.solve(&x.transpose()).map_err(fail)?)
        } else {
            let gram = Cholesky::factor(&matmul_nt(x, x)?.add_diagonal(eps)?).map_err(fail)?;
            DataFactor::Gram {
                input: gram.solve_right(&matmul_nt(x, x)?).map_err(fail)?,
                labels: gram.solve_right(&matmul_nt(c, x)?).map_err(fail)?,
            }
        };
        Ok(Self { x, c, factor })
    }

    /// `(W_dᵀW_d + λMᵀM + eps·I)⁻¹ (W_dᵀ X + λ Mᵀ C) Xᵀ (X Xᵀ + eps·I)⁻¹`
    fn solve(&self, w_d: &Matrix<T>, m_map: &Matrix<T>, lambda: T, eps: T) -> Result<Matrix<T>> {
        let labelled = lambda != T::zero();
        let mut code_gram = matmul_tn(w_d, w_d)?;
        if labelled {
            code_gram = code_gram.add_scaled(&matmul_tn(m_map, m_map)?, lambda)?;
        }
        let rhs = match &self.factor {
            DataFactor::Gram { input, labels } => {
                let rhs = matmul_tn(w_d, input)?;
                if labelled {
                    rhs.add_scaled(&matmul_tn(m_map, labels)?, lambda)?
                } else {
                    rhs
                }
            }
            DataFactor::Samples(z) => {
                let mut back = matmul_tn(w_d, self.x)?;
                if labelled {
                    back = back.add_scaled(&matmul_tn(m_map, self.c)?, lambda)?;
                }
                matmul(&back, z)?
            }
        };
        let code_gram = Cholesky::factor(&code_gram.add_diagonal(eps)?).map_err(|e| {
            Error::Numerical(format!("update_encoder: factor W_dᵀW_d + λMᵀM + eps·I: {e}"))
        })?;
        code_gram
            .solve(&rhs)
            .map_err(|e| Error::Numerical(format!("update_encoder: solve: {e}")))
    }
}

/// Closed-form encoder block:
/// `W_e = A⁻¹ (W_dᵀ X + λ Mᵀ C) Xᵀ B⁻¹` with `A = W_dᵀW_d + λMᵀM + eps·I`
/// and `B = X Xᵀ + eps·I`.
pub fn update_encoder<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    w_d: &Matrix<T>,
    m_map: &Matrix<T>,
    lambda: T,
    eps: T,
) -> Result<Matrix<T>> {
    if !(eps > T::zero()) {
        return Err(param(format!("ridge eps must be positive, got {eps}")));
    }
    if w_d.rows() != x.rows() || m_map.cols() != w_d.cols() || c.cols() != x.cols() || c.rows() != m_map.rows() {
        return Err(Error::Shape {
            op: "update_encoder",
            left: w_d.shape(),
            right: x.shape(),
        });
    }
    EncoderSystem::new(x, c, eps)?.solve(w_d, m_map, lambda, eps)
}

/// Trains one layer with hidden width `h` by block-coordinate descent
/// (decoder, then mapping, then encoder, once per epoch).
pub fn train_layer<T: Scalar>(
    x: &Matrix<T>,
    c: &Matrix<T>,
    h: usize,
    config: &TrainConfig,
) -> Result<(ClassEncoderLayer<T>, TrainTrace<T>)> {
    config.validate()?;
    let (m, n) = x.shape();
    if n == 0 {
        return Err(param("training data has no samples"));
    }
    if c.cols() != n {
        return Err(Error::Shape {
            op: "train_layer labels",
            left: c.shape(),
            right: x.shape(),
        });
    }
    let mut w = init_weights::<T>(m, h, c.rows(), config)?;
    let eps = T::lit(config.eps_ridge);
    let system = EncoderSystem::new(x, c, eps)?;
    let mut trace = TrainTrace {
        objectives: Vec::with_capacity(config.max_epochs),
        converged: false,
        rank_deficient: n < h,
    };

    let mut code = encode(&w, x)?;
    for epoch in 0..config.max_epochs {
        w.w_d = update_decoder(x, &code, eps)?;
        w.m_map = update_mapping(c, &code, eps)?;
        w.w_e = system.solve(&w.w_d, &w.m_map, w.lambda, eps)?;
        code = encode(&w, x)?;

        let obj = objective_from_code(x, c, &w, &code)?;
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("objective is {obj} at epoch {}", epoch + 1)));
        }
        let prev = trace.objectives.last().copied();
        trace.objectives.push(obj);
        if let Some(prev) = prev {
            let rel = (prev - obj).abs() / prev.abs().max(T::min_positive_value());
            if rel < T::lit(config.rel_tol) {
                trace.converged = true;
                break;
            }
        }
    }
    Ok((w, trace))
}
