use gswin::model::checkpoint::{load_into, read_entries, save};
use gswin::model::{micro_config, tiny_config, Gswin};
use gswin::Tensor;

#[test]
fn save_then_load_restores_f32_weights() {
    let a = Gswin::new(&micro_config(), 1).unwrap();
    let b = Gswin::new(&micro_config(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    save(&a, &path).unwrap();
    load_into(&b, &path).unwrap();
    for (p, q) in a.parameters().iter().zip(b.parameters()) {
        assert_eq!(p.name(), q.name());
        let expect: Vec<f64> = p.tensor().to_vec().iter().map(|&v| v as f32 as f64).collect();
        assert_eq!(q.tensor().to_vec(), expect);
    }
    let x = Tensor::full(&[1, 32, 32, 3], 0.25);
    let (ya, yb) = (a.logits(&x).unwrap().to_vec(), b.logits(&x).unwrap().to_vec());
    for (u, v) in ya.iter().zip(&yb) {
        assert!((u - v).abs() < 1e-5);
    }
}

#[test]
fn entries_are_named_and_shaped_like_the_model() {
    let m = Gswin::new(&micro_config(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save(&m, &path).unwrap();
    let entries = read_entries(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(entries.len(), m.parameters().len());
    for (e, p) in entries.iter().zip(m.parameters()) {
        assert_eq!((e.name.as_str(), e.shape.as_slice()), (p.name(), p.shape()));
    }
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"GSWINCKP");
}

#[test]
fn mismatched_model_is_rejected() {
    let m = Gswin::new(&micro_config(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save(&m, &path).unwrap();
    assert!(load_into(&Gswin::new(&tiny_config(), 0).unwrap(), &path).is_err());
    std::fs::write(&path, b"GSWINCKP\x01\x05").unwrap();
    assert!(load_into(&m, &path).is_err());
}
