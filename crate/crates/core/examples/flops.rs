//! Per-module FLOPs of gSwin-T at a few resolutions, padding-free vs zero-padding.
use gswin::analysis::{count_flops, ShiftStrategy};
use gswin::model::preset;

fn main() -> gswin::Result<()> {
    let cfg = preset("gswin-t").expect("preset");
    for res in [224, 256, 384] {
        let free = count_flops(&cfg, res, ShiftStrategy::PaddingFree)?;
        let padded = count_flops(&cfg, res, ShiftStrategy::ZeroPadding)?;
        let saved = 1.0 - free.total_flops as f64 / padded.total_flops as f64;
        println!(
            "res={res} padding-free={:.3}G zero-padding={:.3}G saved={:.1}%",
            free.total_flops as f64 / 1e9,
            padded.total_flops as f64 / 1e9,
            100.0 * saved
        );
    }
    println!();
    print!("{}", count_flops(&cfg, 224, ShiftStrategy::PaddingFree)?.to_table());
    Ok(())
}
