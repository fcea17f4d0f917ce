use std::collections::HashSet;
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dce::data::{
    load_data, load_manifest, load_manifest_with, one_hot, one_hot_labels, read_table, split_stratified,
    stratified_indices, subject_disjoint_indices, synth_blobs, write_table, BlobSpec, Dataset, ImageSize,
};
use dce::eval::{
    auc_trapezoid, confusion_matrix, mean_classwise_accuracy, per_class_accuracy, roc_points, EvaluationReport,
};
use dce::matrix::Matrix;
use dce::Error;

fn write_gray(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    image::GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)])).save(path).unwrap();
}

fn blobs(classes: usize, per: usize, separation: f64, seed: u64) -> Dataset<f64> {
    synth_blobs(&BlobSpec {
        n_per_class: per,
        dim: 16,
        classes,
        separation,
        noise: 1.0,
        seed,
        images_per_subject: None,
    })
    .unwrap()
}

/// Accuracy of assigning each test sample to the closest training class mean.
fn nearest_centroid_accuracy(train: &Dataset<f64>, test: &Dataset<f64>) -> f64 {
    let l = train.num_classes();
    let m = train.dim();
    let mut centroids = vec![vec![0.0; m]; l];
    for (j, &y) in train.labels.iter().enumerate() {
        for i in 0..m {
            centroids[y][i] += train.x[(i, j)];
        }
    }
    for (c, count) in centroids.iter_mut().zip(train.class_counts()) {
        c.iter_mut().for_each(|v| *v /= count as f64);
    }
    let correct = (0..test.len())
        .filter(|&j| {
            let dist = |c: &Vec<f64>| (0..m).map(|i| (test.x[(i, j)] - c[i]).powi(2)).sum::<f64>();
            let best = (0..l).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
            best == test.labels[j]
        })
        .count();
    correct as f64 / test.len() as f64
}

#[test]
fn single_class_one_hot_is_all_ones() {
    let c = one_hot_labels::<f64>(&[0; 5], 1).unwrap().c;
    assert_eq!(c, Matrix::from_fn(1, 5, |_, _| 1.0));
    assert!(one_hot_labels::<f64>(&[0, 2], 2).is_err());
}

#[test]
fn manifest_images_become_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_gray(&dir.path().join("white.png"), 20, 15, |_, _| 255);
    write_gray(&dir.path().join("ramp.png"), 32, 24, |x, _| (x * 8) as u8);
    image::RgbImage::from_pixel(8, 6, image::Rgb([255, 0, 0])).save(dir.path().join("red.png")).unwrap();
    let manifest = dir.path().join("m.csv");
    std::fs::write(
        &manifest,
        "path,label,subject\nwhite.png,a,s1\nramp.png,b,s2\nwhite.png,a,s3\nred.png,b,s4\n",
    )
    .unwrap();

    let ds = load_manifest(&manifest).unwrap();
    assert_eq!(ds.dim(), 3072);
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.class_names, vec!["a", "b"]);
    assert_eq!(ds.labels, vec![0, 1, 0, 1]);
    assert_eq!(ds.subjects.as_deref().unwrap(), ["s1", "s2", "s3", "s4"]);
    assert!(ds.x.column(0).iter().all(|&v| v == 1.0));
    assert_eq!(ds.x.column(0), ds.x.column(2));
    let ramp = ds.x.column(1);
    assert!(ramp.iter().all(|v| (0.0..=1.0).contains(v)));
    // Rows are stored one after another, so each row of the ramp increases left to right.
    assert!(ramp[..64].windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(&ramp[..64], &ramp[64..128]);
    let red = (0.299f64 * 255.0).round() / 255.0;
    assert!(ds.x.column(3).iter().all(|&v| (v - red).abs() < 1e-12));

    let small = load_manifest_with(&manifest, ImageSize { width: 4, height: 2 }).unwrap();
    assert_eq!(small.dim(), 8);
}

#[test]
fn malformed_manifests_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_gray(&dir.path().join("a.png"), 4, 4, |_, _| 0);
    let cases = [
        ("bad_header.csv", "file,label\na.png,x\n"),
        ("missing.csv", "path,label\na.png,x\nnope.png,y\n"),
        ("short.csv", "path,label,subject\na.png,x\n"),
        ("empty.csv", "path,label\n"),
    ];
    for (name, text) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Ingestion { .. })), "{name}");
    }
    let missing = load_manifest(&dir.path().join("missing.csv")).unwrap_err();
    assert!(matches!(missing, Error::Ingestion { line: 3, .. }), "{missing}");
}

#[test]
fn table_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = blobs(3, 7, 2.0, 5);
    ds.subjects = Some((0..ds.len()).map(|j| format!("p{}", j / 3)).collect());
    let path = dir.path().join("t.csv");
    write_table(&path, &ds).unwrap();
    assert_eq!(read_table(&path).unwrap(), ds);
    assert_eq!(load_data(&path, ImageSize::default()).unwrap(), ds);
}

#[test]
fn unrecognised_data_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "foo,bar\n1,2\n").unwrap();
    assert!(matches!(load_data(&path, ImageSize::default()), Err(Error::Ingestion { line: 1, .. })));
}

#[test]
fn stratified_split_takes_floor_of_fraction_per_class() {
    let labels: Vec<usize> = [vec![0; 10], vec![1; 20], vec![2; 7]].concat();
    let (train, test) = stratified_indices(&labels, 3, 0.7, false, 3).unwrap();
    let count = |idx: &[usize], c: usize| idx.iter().filter(|&&i| labels[i] == c).count();
    assert_eq!([count(&train, 0), count(&train, 1), count(&train, 2)], [7, 14, 4]);
    assert_eq!(train.len() + test.len(), labels.len());

    let (train, _) = stratified_indices(&labels, 3, 0.7, true, 3).unwrap();
    assert_eq!([count(&train, 0), count(&train, 1), count(&train, 2)], [4, 4, 4]);

    assert!(matches!(stratified_indices(&[0, 0, 1], 2, 0.5, false, 0), Err(Error::Protocol(_))));
    assert!(stratified_indices(&labels, 3, 1.0, false, 0).is_err());
}

#[test]
fn subject_disjoint_needs_two_subjects() {
    let subjects = vec!["a".to_string(); 4];
    assert!(matches!(
        subject_disjoint_indices(&[0, 1, 0, 1], &subjects, 2, 0.5, 0),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn unseparated_blobs_are_at_chance() {
    let ds = blobs(5, 200, 0.0, 21);
    let (train, test) = split_stratified(&ds, 0.5, 1).unwrap();
    let acc = nearest_centroid_accuracy(&train, &test);
    assert!((acc - 0.2).abs() < 0.06, "accuracy {acc}");
}

#[test]
fn well_separated_blobs_are_nearly_perfect() {
    let ds = blobs(5, 200, 10.0, 22);
    let (train, test) = split_stratified(&ds, 0.5, 1).unwrap();
    let acc = nearest_centroid_accuracy(&train, &test);
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn blob_generation_is_seeded() {
    assert_eq!(blobs(3, 10, 4.0, 7), blobs(3, 10, 4.0, 7));
    assert_ne!(blobs(3, 10, 4.0, 7).x, blobs(3, 10, 4.0, 8).x);
}

#[test]
fn roc_hand_example() {
    let pts = roc_points(&[0.9, 0.8, 0.8, 0.3], &[true, false, true, false]).unwrap();
    let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.fpr, p.tpr)).collect();
    assert_eq!(pairs, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 1.0), (1.0, 1.0)]);
    assert_eq!(auc_trapezoid(&pts), 0.875);
    assert!(roc_points(&[0.1, 0.2], &[true, true]).is_err());
    assert!(roc_points(&[f64::NAN, 0.2], &[true, false]).is_err());
}

#[test]
fn report_renders_roc_file() {
    let names = vec!["neg".to_string(), "pos".to_string()];
    let report =
        EvaluationReport::build(&names, &[0, 0, 1, 1], &[0, 1, 1, 1], Some(&[0.1, 0.6, 0.6, 0.9])).unwrap();
    assert_eq!(report.per_class_accuracy, vec![0.5, 1.0]);
    assert_eq!(report.mean_classwise_accuracy, 0.75);
    let roc = report.render_roc().unwrap();
    // Three distinct scores: a header plus four operating points.
    assert_eq!(roc.lines().count(), 5);
    assert!(report.render_text().contains("Mean class-wise accuracy (%): 75.00"));

    let three = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let r3 = EvaluationReport::build(&three, &[0, 1, 2], &[0, 1, 2], Some(&[0.0, 0.0, 0.0])).unwrap();
    assert!(r3.roc.is_none() && r3.render_roc().is_none());
}

#[test]
fn empty_class_row_is_an_error() {
    assert!(per_class_accuracy(&[vec![1u64, 0], vec![0, 0]]).is_err());
    assert!(mean_classwise_accuracy::<u64>(&[]).is_err());
}

fn labelled(n: usize, l: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..l)).collect()
}

proptest! {
    #[test]
    fn one_hot_columns_sum_to_one(l in 1usize..6, n in 1usize..30, seed in any::<u64>()) {
        let y = labelled(n, l, seed);
        let ds = Dataset::new(Matrix::<f64>::zeros(1, n), y.clone(), None, (0..l).map(|c| c.to_string()).collect()).unwrap();
        let c = one_hot(&ds).unwrap().c;
        prop_assert_eq!(c.shape(), (l, n));
        for j in 0..n {
            let col = c.column(j);
            prop_assert_eq!(col.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(col[y[j]], 1.0);
        }
    }

    #[test]
    fn stratified_split_partitions(l in 1usize..5, n in 2usize..60, frac in 0.05f64..0.95, balanced: bool, seed in any::<u64>()) {
        let mut y = labelled(n, l, seed);
        // Every present class needs at least two samples.
        for c in 0..l {
            if y.iter().filter(|&&v| v == c).count() == 1 {
                y.push(c);
            }
        }
        let (train, test) = stratified_indices(&y, l, frac, balanced, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for c in 0..l {
            let total = y.iter().filter(|&&v| v == c).count();
            if total == 0 { continue; }
            let tr = train.iter().filter(|&&i| y[i] == c).count();
            prop_assert!(tr >= 1 && tr < total);
        }
    }

    #[test]
    fn subject_disjoint_split_keeps_subjects_whole(subjects in 2usize..30, l in 1usize..4, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::new();
        let mut s = Vec::new();
        for k in 0..subjects {
            let class = rng.random_range(0..l);
            for _ in 0..rng.random_range(1..5) {
                y.push(class);
                s.push(format!("subject{k}"));
            }
        }
        let (train, test) = subject_disjoint_indices(&y, &s, l, frac, seed).unwrap();
        prop_assert!(!train.is_empty() && !test.is_empty());
        prop_assert_eq!(train.len() + test.len(), y.len());
        let train_subjects: HashSet<&str> = train.iter().map(|&i| s[i].as_str()).collect();
        prop_assert!(test.iter().all(|&i| !train_subjects.contains(s[i].as_str())));
        let expected = ((frac * subjects as f64).round() as usize).clamp(1, subjects - 1);
        prop_assert_eq!(train_subjects.len(), expected);
    }

    #[test]
    fn confusion_totals_match(l in 1usize..6, n in 0usize..50, seed in any::<u64>()) {
        let actual = labelled(n, l, seed);
        let predicted = labelled(n, l, seed ^ 1);
        let cm = confusion_matrix(&actual, &predicted, l).unwrap();
        prop_assert_eq!(cm.total(), n as u64);
        let sums = cm.row_sums();
        for c in 0..l {
            prop_assert_eq!(sums[c], actual.iter().filter(|&&a| a == c).count() as u64);
        }
        for (row, s) in cm.row_percent().iter().zip(&sums) {
            if *s > 0 {
                prop_assert!((row.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classwise_accuracy_ignores_row_scaling(l in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..l).map(|_| (0..l).map(|_| rng.random_range(0.1..10.0)).collect()).collect();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| {
            let k = rng.random_range(0.01..100.0);
            r.iter().map(|v| v * k).collect()
        }).collect();
        let a = mean_classwise_accuracy(&rows).unwrap();
        let b = mean_classwise_accuracy(&scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn roc_is_invariant_under_monotone_maps(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        truth[0] = true;
        truth[1] = false;
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
        let a = roc_points(&scores, &truth).unwrap();
        let b = roc_points(&mapped, &truth).unwrap();
        prop_assert_eq!(&a, &b);
        let distinct: HashSet<u64> = scores.iter().map(|s| s.to_bits()).collect();
        prop_assert_eq!(a.len(), distinct.len() + 1);
        prop_assert_eq!((a[0].fpr, a[0].tpr), (0.0, 0.0));
        prop_assert_eq!((a[a.len() - 1].fpr, a[a.len() - 1].tpr), (1.0, 1.0));
        prop_assert!(a.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
    }
}
