use std::ops::Range;

use crate::error::{Error, Result};

/// Where a run of windows sits along one axis of the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Band {
    /// Partial windows cut by the shifted origin at the top/left edge.
    Leading,
    /// Complete windows.
    Full,
    /// Partial windows cut by the bottom/right image edge.
    Trailing,
}

/// One window footprint along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    /// Index of the segment's first element inside the full window.
    pub offset: usize,
    pub band: Band,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

fn axis_segments(extent: usize, window: usize, origin: usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut pos = 0;
    if origin > 0 {
        let len = (window - origin).min(extent);
        segs.push(Segment { start: 0, len, offset: origin, band: Band::Leading });
        pos = len;
    }
    while pos < extent {
        let len = window.min(extent - pos);
        let band = if len == window { Band::Full } else { Band::Trailing };
        segs.push(Segment { start: pos, len, offset: 0, band });
        pos += len;
    }
    segs
}

/// All windows sharing one shape and one index offset into the full window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowGroup {
    pub bands: (Band, Band),
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    /// Window shape inside this group, `(rows, cols)`.
    pub shape: (usize, usize),
    /// Offset of the group's windows inside the full window, `(row, col)`.
    pub offset: (usize, usize),
    /// Top-left pixel of every window in the group, row-major.
    pub origins: Vec<(usize, usize)>,
}

impl WindowGroup {
    pub fn tokens_per_window(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Position inside the full window of the token `(x, y)` of this group's windows.
    pub fn center_index(&self, x: usize, y: usize) -> (usize, usize) {
        (self.offset.0 + x, self.offset.1 + y)
    }
}

/// Tiling of an `H×W` plane by `h×w` windows whose lattice starts at
/// `(-oy, -ox)`. Windows cut by the plane border form their own groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowGrid {
    image: (usize, usize),
    window: (usize, usize),
    origin: (usize, usize),
    groups: Vec<WindowGroup>,
}

impl WindowGrid {
    pub fn new(image: (usize, usize), window: (usize, usize), origin: (usize, usize)) -> Result<Self> {
        let (hh, ww) = image;
        let (h, w) = window;
        if h == 0 || w == 0 {
            return Err(Error::Invalid(format!("empty window {:?}", window)));
        }
        if origin.0 >= h || origin.1 >= w {
            return Err(Error::Invalid(format!(
                "grid origin {:?} must lie inside the window {:?}",
                origin, window
            )));
        }
        if hh < h || ww < w {
            return Err(Error::Invalid(format!(
                "window {:?} larger than image {:?}",
                window, image
            )));
        }
        let row_segs = axis_segments(hh, h, origin.0);
        let col_segs = axis_segments(ww, w, origin.1);
        let bands = |segs: &[Segment]| -> Vec<Vec<Segment>> {
            let mut out: Vec<Vec<Segment>> = Vec::new();
            for s in segs {
                match out.last_mut() {
                    Some(run) if run[0].band == s.band => run.push(*s),
                    _ => out.push(vec![*s]),
                }
            }
            out
        };
        let mut groups = Vec::new();
        for rb in bands(&row_segs) {
            for cb in bands(&col_segs) {
                let origins = rb
                    .iter()
                    .flat_map(|r| cb.iter().map(move |c| (r.start, c.start)))
                    .collect();
                groups.push(WindowGroup {
                    bands: (rb[0].band, cb[0].band),
                    rows: rb[0].start..rb[rb.len() - 1].range().end,
                    cols: cb[0].start..cb[cb.len() - 1].range().end,
                    shape: (rb[0].len, cb[0].len),
                    offset: (rb[0].offset, cb[0].offset),
                    origins,
                });
            }
        }
        Ok(WindowGrid { image, window, origin, groups })
    }

    /// Plain partition starting at the top-left pixel.
    pub fn unshifted(image: (usize, usize), window: (usize, usize)) -> Result<Self> {
        Self::new(image, window, (0, 0))
    }

    /// Half-window shift: the leading partial band is `floor(h/2)` rows and `floor(w/2)` columns.
    pub fn shifted(image: (usize, usize), window: (usize, usize)) -> Result<Self> {
        let (h, w) = window;
        if h < 2 || w < 2 {
            return Err(Error::Invalid(format!("cannot shift a {:?} window", window)));
        }
        Self::new(image, window, (h - h / 2, w - w / 2))
    }

    pub fn image(&self) -> (usize, usize) {
        self.image
    }

    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn is_shifted(&self) -> bool {
        self.origin != (0, 0)
    }

    pub fn groups(&self) -> &[WindowGroup] {
        &self.groups
    }

    pub fn window_count(&self) -> usize {
        self.groups.iter().map(WindowGroup::len).sum()
    }

    /// Windows of the zero-padded equivalent: every window counted at full size.
    pub fn padded_window_count(&self) -> usize {
        let (h, w) = self.window;
        let rows = (self.image.0 + self.origin.0).div_ceil(h);
        let cols = (self.image.1 + self.origin.1).div_ceil(w);
        rows * cols
    }

    /// Groups containing the pixel `(r, c)`: exactly one window of one group.
    pub fn window_of(&self, r: usize, c: usize) -> Option<(usize, (usize, usize))> {
        for (gi, g) in self.groups.iter().enumerate() {
            if g.rows.contains(&r) && g.cols.contains(&c) {
                for &(r0, c0) in &g.origins {
                    if (r0..r0 + g.shape.0).contains(&r) && (c0..c0 + g.shape.1).contains(&c) {
                        return Some((gi, (r0, c0)));
                    }
                }
            }
        }
        None
    }
}
