//! Model construction and HFCN files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hevcface_cnn::{expected_param_count, load_model, save_model, CnnModel, Error};

#[test]
fn published_parameter_counts() {
    assert_eq!(
        CnnModel::published(64, 32, 0).unwrap().param_count(),
        708_701
    );
    assert_eq!(
        CnnModel::published(128, 32, 0).unwrap().param_count(),
        6_308_701
    );
    assert_eq!(expected_param_count(96), None);
}

#[test]
fn save_load_save_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    for size in [64, 128] {
        let m = CnnModel::published(size, 42, 5).unwrap();
        let a = dir.path().join("a.hfcn");
        let b = dir.path().join("b.hfcn");
        save_model(&m, &a).unwrap();
        let back = load_model(&a).unwrap();
        save_model(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
        let x: Vec<f32> = (0..10 * size * size * 3).map(|_| rng.random()).collect();
        let p1 = m.predict_proba(&x).unwrap();
        let p2 = back.predict_proba(&x).unwrap();
        assert_eq!(
            p1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn wrong_magic_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.hfcn");
    std::fs::write(&p, b"NOPE\x01\x00\x20").unwrap();
    assert!(matches!(load_model(&p), Err(Error::Format(_))));
}
