use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::WindowGrid;
use super::kernel::multi_head_window_sgu;
use super::oracle::zero_padding_shift_oracle;
use super::params::SguParams;
use super::relbias::relative_table_len;
use crate::error::Result;
use crate::tensor::Tensor;

/// Largest accepted gap between the padding-free path and the padded reference.
pub const EQUIV_TOL: f64 = 1e-12;

/// One input geometry for comparing the padding-free and zero-padded window gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EquivalenceCase {
    pub batch: usize,
    pub image: (usize, usize),
    /// Channels entering the gate (both halves).
    pub channels: usize,
    pub window: usize,
    pub heads: usize,
    pub shifted: bool,
    pub relative_bias: bool,
}

const fn case(
    batch: usize,
    image: (usize, usize),
    channels: usize,
    window: usize,
    heads: usize,
    shifted: bool,
    relative_bias: bool,
) -> EquivalenceCase {
    EquivalenceCase { batch, image, channels, window, heads, shifted, relative_bias }
}

/// Shapes cycled through by [`equivalence_case`]: the nine-group 14×14 layout,
/// a rectangular 21×28 map, the single 7×7 window cut into four corners,
/// small windows, maps that do not tile evenly, and a 56×56 stage-sized map.
pub const EQUIVALENCE_CASES: [EquivalenceCase; 12] = [
    case(1, (14, 14), 12, 7, 3, true, true),
    case(2, (21, 28), 8, 7, 2, true, true),
    case(1, (7, 7), 6, 7, 3, true, true),
    case(1, (14, 14), 12, 7, 3, false, true),
    case(1, (9, 10), 6, 4, 3, true, true),
    case(1, (10, 10), 4, 4, 1, true, false),
    case(2, (8, 8), 16, 4, 8, true, true),
    case(1, (13, 11), 6, 7, 1, true, true),
    case(1, (12, 12), 8, 3, 2, true, false),
    case(1, (15, 17), 8, 7, 4, false, true),
    case(1, (5, 6), 4, 2, 2, true, true),
    case(1, (56, 56), 12, 7, 3, true, true),
];

/// Case `i` of the cycle.
pub fn equivalence_case(i: usize) -> EquivalenceCase {
    EQUIVALENCE_CASES[i % EQUIVALENCE_CASES.len()]
}

/// Draws input and parameters for `case` from `seed` and returns the largest
/// absolute difference between [`multi_head_window_sgu`] and the oracle.
pub fn check_equivalence(case: &EquivalenceCase, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0));
    let EquivalenceCase { batch, image, channels, window, heads, shifted, relative_bias } = *case;
    let win = (window, window);
    let n = window * window;
    let x = draw(&[batch, image.0, image.1, channels]);
    let w = draw(&[n, n, heads]);
    let b = draw(&[n, heads]);
    let rel = relative_bias.then(|| draw(&[relative_table_len(win), heads]));
    let params = SguParams::from_tensors("sgu", w, b, rel, win, heads)?;
    let grid = if shifted { WindowGrid::shifted(image, win)? } else { WindowGrid::unshifted(image, win)? };
    let fast = multi_head_window_sgu(&x, &params, &grid)?.to_vec();
    let reference = zero_padding_shift_oracle(&x, &params, &grid)?.to_vec();
    Ok(fast.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
