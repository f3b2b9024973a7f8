//! Spatial gating units over windows.
//!
//! * [`sgu`]: the whole-sequence gate `Z1 ⊙ (W Z2 + b)`.
//! * [`window_sgu`] / [`multi_head_window_sgu`]: the same gate applied
//!   independently per window and per channel head. A shifted
//!   [`WindowGrid`] is handled without padding: windows cut by the shifted
//!   origin or the image border form up to nine groups whose weights and
//!   biases are index-offset slices of the full window's.
//! * [`zero_padding_shift_oracle`]: the padded reference the padding-free path must equal.
//! * [`materialize_relative_bias`]: the offset-only bias `W_rel`.

mod equivalence;
mod grid;
mod kernel;
mod oracle;
mod params;
mod plan;
mod relbias;

pub use equivalence::{check_equivalence, equivalence_case, EquivalenceCase, EQUIVALENCE_CASES, EQUIV_TOL};
pub use grid::{Band, Segment, WindowGrid, WindowGroup};
pub use kernel::{multi_head_window_sgu, sgu, window_partition, window_reverse, window_sgu, WindowBatch};
pub use oracle::zero_padding_shift_oracle;
pub use params::{SguInit, SguParams};
pub use plan::{build_shift_plan, Placement, Region, ShiftGroupPlan};
pub use relbias::{materialize_relative_bias, relative_position_index, relative_table_len};
