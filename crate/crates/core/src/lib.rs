//! Windowed multi-head spatial gating units (gSwin) on a small reverse-mode
//! autodiff engine.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod sgu;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Parameter, Tensor};
