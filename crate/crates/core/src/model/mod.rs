//! The gSwin backbone and its configuration.

mod block;
pub mod checkpoint;
mod config;
mod gswin;
mod layers;

pub use block::{BlockSpec, GswinBlock};
pub use config::{micro_config, preset, presets, tiny_config, DropPathRates, ModelConfig, Preset, StageLayout};
pub use gswin::{Gswin, Stage};
pub use layers::{patchify, LayerNorm, Linear, PatchEmbed, PatchMerge};
