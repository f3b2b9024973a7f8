//! The preset configurations and how the K and relative-bias knobs move the size.
use gswin::analysis::count_params;
use gswin::model::{preset, presets};

fn main() -> gswin::Result<()> {
    for p in presets() {
        let c = &p.config;
        println!(
            "{}: C={} depths={:?} K={} window={} drop_path={}",
            p.name, c.base_channels, c.depths, c.heads, c.window, p.drop_path.imagenet
        );
    }
    let t = preset("gswin-t").expect("preset");
    for k in [1, 3, 6, 12, 24, 48] {
        for rel in [true, false] {
            let n = count_params(&t.clone().with_heads(k).with_relative_bias(rel))?.total_params;
            println!("gswin-t K={k:<2} rel_bias={rel:<5} params={:.3}M", n as f64 / 1e6);
        }
    }
    Ok(())
}
