//! Random decision forest: bootstrap-resampled Gini trees with √d candidate
//! features per split.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{argmax_rows, check_labels, Predictions};
use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: 100,
            max_depth: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<T> {
    Leaf {
        /// Class frequencies of the training samples that reached this leaf.
        distribution: Vec<T>,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Nodes in a flat arena, root first.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    fn leaf_for(&self, x: &Matrix<T>, sample: usize) -> &[T] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { distribution } => return distribution,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[(*feature, sample)] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn validate(&self, num_features: usize, num_classes: usize) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { distribution } => {
                    if distribution.len() != num_classes {
                        return Err(param(format!("leaf {i} has {} classes", distribution.len())));
                    }
                    let s: T = distribution.iter().copied().sum();
                    if (s - T::one()).abs() > T::lit(1e-9) {
                        return Err(param(format!("leaf {i} distribution sums to {s}")));
                    }
                }
                Node::Split { feature, left, right, .. } => {
                    if *feature >= num_features
                        || *left <= i
                        || *right <= i
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len()
                    {
                        return Err(param(format!("split node {i} has invalid references")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel<T> {
    pub trees: Vec<DecisionTree<T>>,
    pub num_trees: usize,
    pub max_depth: usize,
    /// Candidate features examined per split.
    pub feature_subsample: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

impl<T: Scalar> ForestModel<T> {
    pub fn validate(&self) -> Result<()> {
        if self.trees.len() != self.num_trees || self.trees.is_empty() {
            return Err(param("forest tree count mismatch"));
        }
        for t in &self.trees {
            if t.nodes.is_empty() {
                return Err(param("forest contains an empty tree"));
            }
            t.validate(self.num_features, self.num_classes)?;
        }
        Ok(())
    }

    /// Mean leaf distribution over trees (`n × l`) and argmax labels.
    pub fn predict(&self, features: &Matrix<T>) -> Result<Predictions<T>> {
        if features.rows() != self.num_features {
            return Err(Error::Shape {
                op: "forest input",
                left: features.shape(),
                right: (self.num_features, features.cols()),
            });
        }
        let inv = T::one() / T::lit(self.trees.len() as f64);
        let mut scores = Matrix::zeros(features.cols(), self.num_classes);
        for j in 0..features.cols() {
            let row = scores.row_mut(j);
            for tree in &self.trees {
                for (s, &p) in row.iter_mut().zip(tree.leaf_for(features, j)) {
                    *s += p;
                }
            }
            row.iter_mut().for_each(|s| *s *= inv);
        }
        Ok(Predictions {
            labels: argmax_rows(&scores),
            scores,
        })
    }
}

/// `max(1, ⌊√d⌋)`
pub fn default_feature_subsample(num_features: usize) -> usize {
    ((num_features as f64).sqrt().floor() as usize).max(1)
}

pub fn forest_train<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    num_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel<T>> {
    if params.num_trees == 0 {
        return Err(param("forest needs at least one tree"));
    }
    if features.cols() < 2 {
        return Err(param("forest needs at least two samples"));
    }
    if features.rows() == 0 {
        return Err(param("forest needs at least one feature"));
    }
    check_labels(labels, features.cols(), num_classes)?;

    let k = default_feature_subsample(features.rows());
    let grower = TreeGrower {
        x: features,
        labels,
        num_classes,
        max_depth: params.max_depth,
        candidates: k,
    };
    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            // Per-tree stream derived from the master seed so trees can grow in parallel.
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            grower.grow(&mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        num_trees: params.num_trees,
        max_depth: params.max_depth,
        feature_subsample: k,
        num_features: features.rows(),
        num_classes,
    })
}

struct TreeGrower<'a, T> {
    x: &'a Matrix<T>,
    labels: &'a [usize],
    num_classes: usize,
    max_depth: usize,
    candidates: usize,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    impurity: f64,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl<T: Scalar> TreeGrower<'_, T> {
    fn grow(&self, rng: &mut ChaCha8Rng) -> DecisionTree<T> {
        let n = self.x.cols();
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut tree = DecisionTree { nodes: Vec::new() };
        self.build(&mut tree, bootstrap, 0, rng);
        tree
    }

    fn build(&self, tree: &mut DecisionTree<T>, samples: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let at = tree.nodes.len();
        let mut counts = vec![0usize; self.num_classes];
        for &s in &samples {
            counts[self.labels[s]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.max_depth || samples.len() < 2 {
            None
        } else {
            self.best_split(&samples, &counts, rng)
        };
        let Some(split) = split else {
            let total = T::lit(samples.len() as f64);
            let distribution = counts.iter().map(|&c| T::lit(c as f64) / total).collect();
            tree.nodes.push(Node::Leaf { distribution });
            return at;
        };

        tree.nodes.push(Node::Leaf { distribution: Vec::new() });
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.x[(split.feature, s)] <= split.threshold);
        let l = self.build(tree, left, depth + 1, rng);
        let r = self.build(tree, right, depth + 1, rng);
        tree.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        at
    }

    /// Examines `candidates` random features; keeps drawing more only if none of them
    /// can separate the node at all.
    fn best_split(&self, samples: &[usize], counts: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit<T>> {
        let mut order: Vec<usize> = (0..self.x.rows()).collect();
        order.shuffle(rng);
        let mut best: Option<BestSplit<T>> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.candidates && best.is_some() {
                break;
            }
            if let Some(s) = self.split_on(f, samples, counts) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn split_on(&self, f: usize, samples: &[usize], counts: &[usize]) -> Option<BestSplit<T>> {
        let row = self.x.row(f);
        let mut sorted: Vec<(T, usize)> = samples.iter().map(|&s| (row[s], self.labels[s])).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n = sorted.len();
        let mut left = vec![0usize; self.num_classes];
        let mut right = counts.to_vec();
        let mut best: Option<BestSplit<T>> = None;
        for i in 0..n - 1 {
            let (v, y) = sorted[i];
            left[y] += 1;
            right[y] -= 1;
            let next = sorted[i + 1].0;
            if next <= v {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = v + (next - v) / T::lit(2.0);
                let threshold = if mid < next { mid } else { v };
                best = Some(BestSplit { feature: f, threshold, impurity });
            }
        }
        best
    }
}
