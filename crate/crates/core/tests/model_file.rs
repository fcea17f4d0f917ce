use proptest::prelude::*;

use dce::data::{synth_blobs, BlobSpec, ImageSize};
use dce::model_file::{decode_bundle, encode_bundle, load_model, save_model, MAGIC};
use dce::pipeline::{train_pipeline, ClassifierKind, ModelBundle, PipelineConfig};
use dce::{Error, TrainConfig};

fn trained(kind: ClassifierKind, dims: Vec<usize>, classes: usize, seed: u64) -> ModelBundle {
    let data = synth_blobs(&BlobSpec {
        n_per_class: 6,
        dim: 5,
        classes,
        separation: 3.0,
        noise: 1.0,
        seed,
        images_per_subject: None,
    })
    .unwrap();
    let cfg = PipelineConfig {
        hidden_dims: dims,
        train: TrainConfig { max_epochs: 5, ..Default::default() },
        classifier: kind,
        nnet_hidden: vec![3],
        nnet_epochs: 5,
        forest_trees: 3,
        forest_max_depth: 3,
        ..Default::default()
    };
    let mut bundle = train_pipeline(&data, &cfg, seed).unwrap();
    bundle.image_size = ImageSize { width: 5, height: 1 };
    bundle.config_echo = format!("seed = {seed}\nclassifier = \"{kind}\"\n");
    bundle
}

fn kind() -> impl Strategy<Value = ClassifierKind> {
    prop_oneof![Just(ClassifierKind::Direct), Just(ClassifierKind::Nnet), Just(ClassifierKind::Forest)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bundles_round_trip_bit_exactly(
        kind in kind(),
        dims in prop::collection::vec(1usize..6, 1..4),
        classes in 2usize..4,
        seed in any::<u64>(),
    ) {
        let bundle = trained(kind, dims, classes, seed);
        let bytes = encode_bundle(&bundle).unwrap();
        prop_assert_eq!(&bytes[..8], MAGIC);
        let back = decode_bundle(&bytes).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(encode_bundle(&back).unwrap(), bytes);
    }

    #[test]
    fn truncations_never_decode(kind in kind(), cut in 0.0f64..1.0, seed in any::<u64>()) {
        let bytes = encode_bundle(&trained(kind, vec![3], 2, seed)).unwrap();
        let len = (cut * bytes.len() as f64) as usize;
        prop_assert!(decode_bundle(&bytes[..len]).is_err());
    }

    #[test]
    fn payload_bit_flips_are_integrity_errors(seed in any::<u64>(), pick in any::<prop::sample::Index>(), bit in 0u8..8) {
        let bytes = encode_bundle(&trained(ClassifierKind::Nnet, vec![4, 2], 3, seed)).unwrap();
        // The digest follows the header's fixed fields; everything after it is payload.
        let header_len = 8 + 16 + 8 * 3 + 8 + 32;
        let i = header_len + pick.index(bytes.len() - header_len);
        let mut flipped = bytes.clone();
        flipped[i] ^= 1 << bit;
        prop_assert!(matches!(decode_bundle(&flipped), Err(Error::Integrity(_))), "byte {}", i);
    }
}

#[test]
fn empty_and_foreign_files_are_rejected() {
    assert!(matches!(decode_bundle(&[]), Err(Error::Integrity(_))));
    let mut bytes = encode_bundle(&trained(ClassifierKind::Direct, vec![2], 2, 1)).unwrap();
    bytes[0] = b'X';
    assert!(matches!(decode_bundle(&bytes), Err(Error::Format(_))));
}

#[test]
fn save_and_load_through_the_file_system() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dce");
    let bundle = trained(ClassifierKind::Forest, vec![4, 3], 3, 9);
    save_model(&path, &bundle).unwrap();
    assert_eq!(load_model(&path).unwrap(), bundle);
    assert!(matches!(load_model(&dir.path().join("absent.dce")), Err(Error::Io(_))));
}
