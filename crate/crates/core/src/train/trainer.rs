use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainConfig;
use super::data::{Split, SyntheticTask};
use super::optim::{lr_at, AdamHyper, AdamState};
use crate::error::{Error, Result};
use crate::model::Gswin;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRecord {
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_acc: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<MetricRecord>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len().max(1) as f64
    }

    /// Mean training loss over the first `n` steps.
    pub fn head_mean(&self, n: usize) -> f64 {
        let l = self.losses();
        Self::mean(&l[..n.min(l.len())])
    }

    /// Mean training loss over the last `n` steps.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let l = self.losses();
        Self::mean(&l[l.len().saturating_sub(n)..])
    }

    /// `1 - tail/head` over windows of `n` steps.
    pub fn loss_reduction(&self, n: usize) -> f64 {
        1.0 - self.tail_mean(n) / self.head_mean(n)
    }

    pub fn final_eval_acc(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.eval_acc)
    }

    /// `step,lr,train_loss,eval_acc`; steps without evaluation leave the last field empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Step-at-a-time training loop. Data order and stochastic depth draw from
/// separate seeded streams, so a run is a pure function of its inputs.
pub struct Trainer<'a> {
    model: &'a Gswin,
    task: &'a SyntheticTask,
    config: TrainConfig,
    opt: AdamState,
    order: Vec<usize>,
    cursor: usize,
    shuffle: ChaCha8Rng,
    drop: ChaCha8Rng,
    step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut Gswin, task: &'a SyntheticTask, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if model.config().num_classes != task.config().classes || model.config().image_size != task.config().image_size
        {
            return Err(Error::Config("model and task disagree on classes or image size".into()));
        }
        model.set_drop_path_rate(config.drop_path)?;
        let model: &'a Gswin = model;
        let opt = AdamState::new(&model.parameters(), AdamHyper::from(&config));
        let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
        let mut drop = ChaCha8Rng::seed_from_u64(config.seed);
        drop.set_stream(1);
        let mut order: Vec<usize> = (0..task.len(Split::Train)).collect();
        order.shuffle(&mut shuffle);
        Ok(Trainer { model, task, config, opt, order, cursor: 0, shuffle, drop, step: 0 })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    fn next_indices(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.config.batch_size);
        while out.len() < self.config.batch_size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.shuffle);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }

    /// One optimizer step; the record carries no evaluation.
    pub fn step(&mut self) -> Result<MetricRecord> {
        let t = self.step + 1;
        let lr = lr_at(t, &self.config);
        let idx = self.next_indices();
        let (images, labels) = self.task.batch(Split::Train, &idx)?;
        self.model.zero_grad();
        let logits = self.model.forward(&images, Some(&mut self.drop))?;
        let loss = logits.cross_entropy(&labels, self.config.label_smoothing)?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::Diverged { step: t, loss: value });
        }
        loss.backward()?;
        drop(loss);
        drop(logits);
        self.opt.step(&self.model.parameters(), lr, self.config.weight_decay)?;
        self.step = t;
        Ok(MetricRecord { step: t, lr, train_loss: value, eval_acc: None })
    }

    /// Loss and accuracy on the whole eval split, without stochastic depth.
    pub fn evaluate(&self) -> Result<EvalResult> {
        let n = self.task.len(Split::Eval);
        let (mut loss, mut correct) = (0.0, 0usize);
        for start in (0..n).step_by(self.config.batch_size) {
            let idx: Vec<usize> = (start..(start + self.config.batch_size).min(n)).collect();
            let (images, labels) = self.task.batch(Split::Eval, &idx)?;
            let logits = self.model.logits(&images)?.detach();
            loss += logits.cross_entropy(&labels, self.config.label_smoothing)?.item() * idx.len() as f64;
            let classes = logits.shape()[1];
            let data = logits.data();
            for (row, &y) in data.chunks(classes).zip(&labels) {
                let best = row
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
                correct += usize::from(best == y);
            }
        }
        Ok(EvalResult { loss: loss / n as f64, accuracy: correct as f64 / n as f64 })
    }

    fn due_for_eval(&self) -> bool {
        let every = self.config.eval_interval;
        self.step == self.config.total_steps || (every > 0 && self.step.is_multiple_of(every))
    }

    /// Runs to `total_steps`, evaluating on schedule.
    pub fn run(&mut self, mut on_record: impl FnMut(&MetricRecord)) -> Result<TrainHistory> {
        let mut history = TrainHistory::default();
        while self.step < self.config.total_steps {
            let mut rec = self.step()?;
            if self.due_for_eval() {
                rec.eval_acc = Some(self.evaluate()?.accuracy);
            }
            on_record(&rec);
            history.records.push(rec);
        }
        Ok(history)
    }
}

/// Trains `model` in place on `task`.
pub fn train(model: &mut Gswin, task: &SyntheticTask, config: &TrainConfig) -> Result<TrainHistory> {
    Trainer::new(model, task, config.clone())?.run(|_| {})
}
