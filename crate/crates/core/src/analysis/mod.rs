//! Parameter and FLOP accounting, and weight-map export.

mod cost;
mod weights;

pub use cost::{count_flops, count_params, enumerate_params, module_key, CostEntry, CostReport, ShiftStrategy, FLOP_CONVENTION};
pub use weights::{export_weight_maps, read_weight_csv, weight_map_grid, WeightMapFiles};
