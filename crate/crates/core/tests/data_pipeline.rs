use mind_core::data::*;
use mind_core::nn::{Modality, TaskKind};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(n: usize) -> SyntheticSpec {
    SyntheticSpec {
        n_samples: n,
        seed: 17,
        ..Default::default()
    }
}

fn matrix(a: &mind_core::tensor::Array<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

#[test]
fn noiseless_features_span_exactly_the_latents() {
    let ds = generate_synthetic(&SyntheticSpec { sigma: 0.0, ..spec(200) }).unwrap();
    let factors = ds.factors.as_ref().unwrap();
    for m in Modality::ALL {
        let x = matrix(&ds.features[m.index()]);
        let shared = matrix(&factors.shared);
        let private = matrix(&factors.private[m.index()]);
        let latent = DMatrix::from_fn(x.nrows(), 8, |r, c| if c < 4 { shared[(r, c)] } else { private[(r, c - 4)] });
        let w = x.clone().svd(true, true).solve(&latent, 1e-12).unwrap();
        let residual = (&x * w - &latent).abs().max();
        assert!(residual <= 1e-10, "modality {m}: residual {residual}");
    }
}

#[test]
fn file_round_trips() {
    let ds = generate_synthetic(&spec(120)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("data.mndf");
    write_features(&bin, &ds).unwrap();
    let back = load_features(&bin).unwrap();
    assert!(back.same_content(&ds));
    assert_eq!(back.features, ds.features);

    let csv_dir = dir.path().join("csv");
    write_csv_dir(&csv_dir, &ds).unwrap();
    let from_csv = load_features(&csv_dir).unwrap();
    assert!(from_csv.same_content(&back), "CSV and binary loaders disagree");
    for (a, b) in from_csv.features.iter().zip(&back.features) {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn classification_round_trips_through_csv() {
    let ds = generate_synthetic(&SyntheticSpec {
        task: TaskKind::Classification { classes: 3 },
        ..spec(60)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_csv_dir(dir.path(), &ds).unwrap();
    assert!(read_csv_dir(dir.path()).unwrap().same_content(&ds));
}

#[test]
fn truncated_files_are_errors() {
    let bytes = write_mindf(&generate_synthetic(&spec(30)).unwrap()).unwrap();
    for cut in [0, 3, 8, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(read_mindf(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.mndf");
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(load_features(&path).is_err());
}

#[test]
fn synth_output_is_stable() {
    let a = write_mindf(&generate_synthetic(&spec(50)).unwrap()).unwrap();
    let b = write_mindf(&generate_synthetic(&spec(50)).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(&a[..4], MINDF_MAGIC);

    let bad = SyntheticSpec { d_shared: 10, d_private: 10, ..spec(50) };
    let err = generate_synthetic(&bad).unwrap_err().to_string();
    assert!(err.contains("exceeds"), "{err}");
}

#[test]
fn batch_counts() {
    let ds = generate_synthetic(&spec(100)).unwrap();
    // Use every sample as training data for the counting contract.
    let mut all_train = ds.clone();
    all_train.splits = vec![Split::Train; 100];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train = batches(&all_train, Split::Train, 32, BatchMode::Train, true, &mut rng).unwrap();
    assert_eq!(train.len(), 3);
    assert!(train.iter().all(|b| b.len() == 32));
    let eval = batches(&all_train, Split::Train, 32, BatchMode::Eval, false, &mut rng).unwrap();
    assert_eq!(eval.len(), 4);
    assert_eq!(eval.iter().map(|b| b.len()).sum::<usize>(), 100);
}

proptest! {
    #[test]
    fn class7_is_monotone_and_bounded(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(label_to_class7(lo) <= label_to_class7(hi));
        prop_assert!(label_to_class7(hi) <= 6);
    }
}
