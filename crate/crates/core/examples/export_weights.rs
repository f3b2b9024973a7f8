//! Trains a small model briefly, then dumps one head's spatial weights as CSV and PGM.
//!
//! `cargo run --release --example export_weights -- [out_dir]`
use std::path::PathBuf;

use gswin::analysis::export_weight_maps;
use gswin::model::Gswin;
use gswin::train::{train, RunConfig, SyntheticTask, TrainConfig};

fn main() -> gswin::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "weight_maps".into()));
    std::fs::create_dir_all(&dir)?;
    let run = RunConfig::default();
    let task = SyntheticTask::new(run.task.clone())?;
    let mut model = Gswin::new(&run.model, 0)?;
    let cfg = TrainConfig { total_steps: 200, warmup_steps: 10, ..run.train };
    let h = train(&mut model, &task, &cfg)?;
    println!("trained {} steps, eval acc {:.3}", h.records.len(), h.final_eval_acc().unwrap_or(0.0));
    for head in 0..model.config().heads {
        let files = export_weight_maps(&model, 0, 1, head, &dir)?;
        println!("{} ({}x{})", files.csv.display(), files.rows, files.cols);
    }
    Ok(())
}
