//! Multi-scale features from gSwin-VT, as a dense-prediction neck would consume them.
use gswin::model::{preset, Gswin};
use gswin::Tensor;

fn main() -> gswin::Result<()> {
    let model = Gswin::new(&preset("gswin-vt").expect("preset"), 0)?;
    let image = Tensor::from_fn(&[1, 224, 224, 3], |i| ((i % 97) as f64 / 48.0) - 1.0);
    for (s, f) in model.extract_pyramid(&image)?.iter().enumerate() {
        let v = f.to_vec();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        println!("stage {s}: {:?} mean={mean:.4}", f.shape());
    }
    Ok(())
}
