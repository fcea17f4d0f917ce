use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dce::data::read_table;
use dce::deep::features;
use dce::model_file::load_model;

fn dce(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dce")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Images bright on the left labelled `left`, bright on the right `right`,
/// with pixel noise, one subject per image.
fn write_manifest(dir: &Path, name: &str, per_class: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("path,label,subject\n");
    for (label, bright_left) in [("left", true), ("right", false)] {
        for k in 0..per_class {
            let file = format!("{name}_{label}_{k}.png");
            let img = image::GrayImage::from_fn(16, 12, |x, _| {
                let base = if (x < 8) == bright_left { 200.0 } else { 40.0 };
                image::Luma([(base + rng.random_range(-30.0..30.0f64)) as u8])
            });
            img.save(dir.join(&file)).unwrap();
            text.push_str(&format!("{file},{label},{name}{label}{k}\n"));
        }
    }
    std::fs::write(dir.join(format!("{name}.csv")), text).unwrap();
}

const IMAGE_CONFIG: &str = r#"
data = "train.csv"
resize_width = 8
resize_height = 6
hidden_dims = [6, 4]
max_epochs = 30
split = "none"
model_out = "model.dce"
"#;

#[test]
fn train_evaluate_encode_inspect_on_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_manifest(d, "train", 10, 1);
    write_manifest(d, "test", 6, 2);
    std::fs::write(d.join("run.toml"), IMAGE_CONFIG).unwrap();

    let log = ok(&dce(&["train", "--config", "run.toml"], d));
    assert!(log.contains("training on 20 samples (2 classes, dimension 48), 0 held out"), "{log}");
    assert!(log.contains("layer 2 final objective"));
    assert!(d.join("model.dce").exists());

    let report = ok(&dce(&["evaluate", "--model", "model.dce", "--manifest", "test.csv", "--out", "r.txt"], d));
    assert!(report.contains("Mean class-wise accuracy (%): 100.00"), "{report}");
    assert_eq!(std::fs::read_to_string(d.join("r.txt")).unwrap(), report);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(json["mean_classwise_accuracy"], 1.0);

    let bundle = load_model(&d.join("model.dce")).unwrap();
    let test = dce::data::load_manifest_with(&d.join("test.csv"), bundle.image_size).unwrap();
    let pred = bundle.predict(&test.x).unwrap();
    let distinct: HashSet<u64> = pred.scores.column(1).iter().map(|s| s.to_bits()).collect();
    let roc = std::fs::read_to_string(d.join("r.roc")).unwrap();
    assert_eq!(roc.lines().count(), distinct.len() + 2);
    assert_eq!(roc.lines().next(), Some("# fpr tpr"));

    ok(&dce(&["encode", "--model", "model.dce", "--manifest", "test.csv", "--out", "f1.csv"], d));
    ok(&dce(&["encode", "--model", "model.dce", "--manifest", "test.csv", "--out", "f2.csv"], d));
    let f1 = std::fs::read(d.join("f1.csv")).unwrap();
    assert_eq!(f1, std::fs::read(d.join("f2.csv")).unwrap());
    let encoded = read_table(&d.join("f1.csv")).unwrap();
    assert_eq!(encoded.x, features(&bundle.model, &test.x).unwrap());
    assert_eq!(encoded.dim(), 4);

    let info = ok(&dce(&["inspect", "--model", "model.dce"], d));
    for needle in ["format version: 1", "dims: [48, 6, 4]", "classes: left, right", "classifier: direct", "image size: 8x6"] {
        assert!(info.contains(needle), "missing {needle:?} in\n{info}");
    }
}

#[test]
fn synthetic_training_with_overrides_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("synth.toml"),
        r#"
synth_classes = 3
synth_dim = 10
synth_per_class = 30
synth_separation = 8.0
synth_seed = 4
hidden_dims = [6]
max_epochs = 40
nnet_hidden = [8]
nnet_epochs = 200
forest_trees = 10
forest_max_depth = 6
report = "held_out.txt"
"#,
    )
    .unwrap();

    for classifier in ["direct", "nnet", "forest"] {
        let out = format!("{classifier}.dce");
        let log = ok(&dce(&["train", "--config", "synth.toml", "--classifier", classifier, "--seed", "3", "--out", &out], d));
        assert!(log.contains("training on 63 samples (3 classes, dimension 10), 27 held out"), "{log}");
        assert!(log.contains("held-out mean class-wise accuracy (%)"));
        let info = ok(&dce(&["inspect", "--model", &out], d));
        assert!(info.contains(&format!("classifier: {classifier}")), "{info}");
        assert!(info.contains("seed = 3"));
    }
    assert!(d.join("held_out.txt").exists() && d.join("held_out.json").exists());
    // Three classes have no ROC.
    assert!(!d.join("held_out.roc").exists());

    ok(&dce(&["synth", "--config", "synth.toml", "--out", "s1.csv"], d));
    ok(&dce(&["synth", "--config", "synth.toml", "--out", "s2.csv", "--seed", "4"], d));
    ok(&dce(&["synth", "--config", "synth.toml", "--out", "s3.csv", "--seed", "5"], d));
    let table = read_table(&d.join("s1.csv")).unwrap();
    assert_eq!((table.len(), table.dim(), table.num_classes()), (90, 10, 3));
    assert_eq!(std::fs::read(d.join("s1.csv")).unwrap(), std::fs::read(d.join("s2.csv")).unwrap());
    assert_ne!(std::fs::read(d.join("s1.csv")).unwrap(), std::fs::read(d.join("s3.csv")).unwrap());
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_manifest(d, "train", 3, 5);
    std::fs::write(d.join("typo.toml"), "synth_classes = 2\nhiden_dims = [4]\n").unwrap();
    std::fs::write(d.join("nodata.toml"), "hidden_dims = [4]\n").unwrap();
    std::fs::write(d.join("ok.toml"), IMAGE_CONFIG).unwrap();
    std::fs::write(d.join("other.csv"), "path,label\ntrain_left_0.png,cat\n").unwrap();

    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--config", "typo.toml"],
        vec!["train", "--config", "nodata.toml"],
        vec!["train", "--config", "absent.toml"],
        vec!["train", "--config", "ok.toml", "--classifier", "svm"],
        vec!["inspect", "--model", "absent.dce"],
        vec!["frobnicate"],
    ];
    for args in &cases {
        let out = dce(args, d);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no error");
    }

    ok(&dce(&["train", "--config", "ok.toml"], d));
    let out = dce(&["evaluate", "--model", "model.dce", "--manifest", "other.csv", "--out", "r.txt"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cat"));

    std::fs::write(d.join("model.dce"), b"").unwrap();
    let out = dce(&["inspect", "--model", "model.dce"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrity"));
}
