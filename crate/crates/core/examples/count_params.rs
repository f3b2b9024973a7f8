//! Parameter and FLOP totals for the three presets, then the per-module table for gswin-t.
use gswin::analysis::{count_flops, count_params, ShiftStrategy};
use gswin::model::presets;

fn main() -> gswin::Result<()> {
    for p in presets() {
        let params = count_params(&p.config)?;
        let free = count_flops(&p.config, 224, ShiftStrategy::PaddingFree)?;
        let padded = count_flops(&p.config, 224, ShiftStrategy::ZeroPadding)?;
        println!(
            "{:<9} params={:.2}M flops={:.3}G (zero-padding {:.3}G)",
            p.name,
            params.total_params as f64 / 1e6,
            free.total_flops as f64 / 1e9,
            padded.total_flops as f64 / 1e9,
        );
    }
    println!();
    print!("{}", count_params(&presets()[1].config)?.to_table());
    Ok(())
}
