use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Rows in the compact relative-offset table of an `h×w` window.
pub fn relative_table_len(window: (usize, usize)) -> usize {
    (2 * window.0 - 1) * (2 * window.1 - 1)
}

/// For every token pair `(p, q)` of the window, the table row holding offset `p - q`.
pub fn relative_position_index(window: (usize, usize)) -> Vec<usize> {
    let (h, w) = window;
    let n = h * w;
    let mut idx = Vec::with_capacity(n * n);
    for p in 0..n {
        let (x, y) = (p / w, p % w);
        for q in 0..n {
            let (xq, yq) = (q / w, q % w);
            let dr = x + h - 1 - xq;
            let dc = y + w - 1 - yq;
            idx.push(dr * (2 * w - 1) + dc);
        }
    }
    idx
}

/// Expands a `[(2h-1)(2w-1), K]` table to the dense `[hw, hw, K]` bias whose
/// entries depend only on the offset between the two tokens.
pub fn materialize_relative_bias(table: &Tensor, window: (usize, usize)) -> Result<Tensor> {
    let rows = relative_table_len(window);
    if table.rank() != 2 || table.shape()[0] != rows {
        return Err(Error::shape(
            "materialize_relative_bias",
            format!(
                "window {:?} needs a [{}, K] table, got {:?}",
                window,
                rows,
                table.shape()
            ),
        ));
    }
    let n = window.0 * window.1;
    let heads = table.shape()[1];
    table
        .gather_rows(&relative_position_index(window))?
        .reshape(&[n, n, heads])
}
