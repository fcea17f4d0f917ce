//! Small-scale singular value decomposition (one-sided Jacobi).
//!
//! Used to check reconstruction optimality; never called on the training path.

use crate::error::{param, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct TruncatedSvd<T> {
    /// Leading singular values, descending.
    pub singular_values: Vec<T>,
    /// `rows × h` matrix whose columns are the matching left singular vectors.
    pub left_basis: Matrix<T>,
}

/// All singular values of `x` (min(rows, cols) of them), descending.
pub fn singular_values<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    let (sigma, _) = jacobi(x);
    sigma
        .into_iter()
        .take(x.rows().min(x.cols()))
        .map(|(s, _)| s)
        .collect()
}

/// Leading `h` singular triplets' values and left vectors.
pub fn truncated_svd<T: Scalar>(x: &Matrix<T>, h: usize) -> Result<TruncatedSvd<T>> {
    let k = x.rows().min(x.cols());
    if h == 0 || h > k {
        return Err(param(format!(
            "truncated_svd rank {h} outside 1..={k} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    let (sigma, rot) = jacobi(x);
    let left_basis = Matrix::from_fn(x.rows(), h, |i, j| rot[(i, sigma[j].1)]);
    Ok(TruncatedSvd {
        singular_values: sigma[..h].iter().map(|&(s, _)| s).collect(),
        left_basis,
    })
}

/// Orthogonalises the columns of `xᵀ` by plane rotations accumulated in a
/// `rows × rows` orthogonal matrix `W`, so that `xᵀ W` has orthogonal columns
/// whose norms are the singular values and `W`'s columns are left singular
/// vectors of `x`. Returns `(σ, column)` pairs sorted descending plus `W`.
fn jacobi<T: Scalar>(x: &Matrix<T>) -> (Vec<(T, usize)>, Matrix<T>) {
    let n = x.rows();
    // Columns of xᵀ are the rows of x; keep them as contiguous vectors.
    let mut cols: Vec<Vec<T>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let mut rot: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: T = cols[p].iter().map(|&v| v * v).sum();
                let beta: T = cols[q].iter().map(|&v| v * v).sum();
                let gamma: T = cols[p].iter().zip(&cols[q]).map(|(&a, &b)| a * b).sum();
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|&v| v * v).sum::<T>().sqrt(), j))
        .collect();
    sigma.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    // rot[j] holds column j of W.
    let w = Matrix::from_fn(n, n, |i, j| rot[j][i]);
    (sigma, w)
}

fn rotate<T: Scalar>(v: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = v.split_at_mut(q);
    for (a, b) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
