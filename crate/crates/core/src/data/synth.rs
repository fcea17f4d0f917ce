use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{param, Result};
use crate::matrix::Matrix;

/// Entries are clipped to `±CLIP` so generated data is always finite.
const CLIP: f64 = 1e6;

/// Gaussian blobs around `separation · μ_c` with seeded random unit directions `μ_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
    /// When set, consecutive runs of this many samples in a class share a subject id.
    pub images_per_subject: Option<usize>,
}

/// Samples are emitted class by class; labels name classes `class0`, `class1`, ….
pub fn synth_blobs(spec: &BlobSpec) -> Result<Dataset<f64>> {
    if spec.n_per_class == 0 || spec.dim == 0 || spec.classes == 0 {
        return Err(param(format!("blob counts must be positive: {spec:?}")));
    }
    if !(spec.separation >= 0.0 && spec.noise >= 0.0) {
        return Err(param("separation and noise must be non-negative"));
    }
    if spec.images_per_subject == Some(0) {
        return Err(param("images_per_subject must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };

    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let v: Vec<f64> = (0..spec.dim).map(|_| gauss()).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm * spec.separation).collect()
        })
        .collect();

    let n = spec.n_per_class * spec.classes;
    let mut x = Matrix::zeros(spec.dim, n);
    let mut labels = Vec::with_capacity(n);
    let mut subjects = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for k in 0..spec.n_per_class {
            let j = labels.len();
            for (i, &mu) in center.iter().enumerate() {
                x[(i, j)] = (mu + spec.noise * gauss()).clamp(-CLIP, CLIP);
            }
            labels.push(c);
            if let Some(per) = spec.images_per_subject {
                subjects.push(format!("c{c}s{}", k / per));
            }
        }
    }
    let class_names = (0..spec.classes).map(|c| format!("class{c}")).collect();
    let subjects = spec.images_per_subject.map(|_| subjects);
    Dataset::new(x, labels, subjects, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BlobSpec {
        BlobSpec {
            n_per_class: 5,
            dim: 4,
            classes: 3,
            separation: 2.0,
            noise: 0.0,
            seed: 1,
            images_per_subject: Some(2),
        }
    }

    #[test]
    fn zero_noise_collapses_classes() {
        let ds = synth_blobs(&spec()).unwrap();
        for j in 0..ds.len() {
            let first = ds.labels.iter().position(|&y| y == ds.labels[j]).unwrap();
            assert_eq!(ds.x.column(j), ds.x.column(first));
        }
        let norm: f64 = ds.x.column(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reproducible_and_subjects_grouped() {
        let a = synth_blobs(&BlobSpec { noise: 1.0, ..spec() }).unwrap();
        let b = synth_blobs(&BlobSpec { noise: 1.0, ..spec() }).unwrap();
        assert_eq!(a, b);
        let s = a.subjects.unwrap();
        assert_eq!(&s[..5], &["c0s0", "c0s0", "c0s1", "c0s1", "c0s2"]);
    }

    #[test]
    fn rejects_empty_specs() {
        assert!(synth_blobs(&BlobSpec { classes: 0, ..spec() }).is_err());
        assert!(synth_blobs(&BlobSpec { noise: -1.0, ..spec() }).is_err());
    }
}
