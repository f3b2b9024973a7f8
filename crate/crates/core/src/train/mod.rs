//! Desk-scale training: synthetic gratings, AdamW with warm-up plus cosine decay,
//! stochastic depth and label smoothing.

mod config;
mod data;
mod optim;
mod trainer;

pub use config::{RunConfig, TrainConfig};
pub use data::{Split, SyntheticTask, TaskConfig};
pub use optim::{adamw_update, lr_at, AdamHyper, AdamState};
pub use trainer::{train, EvalResult, MetricRecord, TrainHistory, Trainer};
