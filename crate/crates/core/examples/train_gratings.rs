//! Trains the tiny model on synthetic gratings and writes a metrics CSV.
//!
//! cargo run --release --example train_gratings -- [steps] [metrics.csv]
use std::path::PathBuf;
use std::time::Instant;

use gswin::model::{tiny_config, Gswin};
use gswin::train::{SyntheticTask, TaskConfig, TrainConfig, Trainer};

fn main() -> gswin::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse().expect("steps must be an integer")).unwrap_or(2000);
    let csv = PathBuf::from(args.next().unwrap_or_else(|| "metrics.csv".into()));

    let config = TrainConfig { total_steps: steps, warmup_steps: (steps / 20).max(1), ..TrainConfig::default() };
    let task = SyntheticTask::new(TaskConfig::default())?;
    let mut model = Gswin::new(&tiny_config(), config.seed)?;
    println!("params={}", model.param_count());

    let start = Instant::now();
    let mut trainer = Trainer::new(&mut model, &task, config)?;
    let history = trainer.run(|r| {
        if let Some(acc) = r.eval_acc {
            println!("step={} lr={:.2e} loss={:.4} eval_acc={:.3} t={:.0?}", r.step, r.lr, r.train_loss, acc, start.elapsed());
        }
    })?;
    println!(
        "loss_reduction={:.3} final_eval_acc={:.3}",
        history.loss_reduction(10),
        history.final_eval_acc().unwrap_or(0.0)
    );
    history.write_csv(&csv)?;
    println!("wrote {}", csv.display());
    Ok(())
}
