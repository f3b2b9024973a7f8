use super::grid::Band;
use crate::error::{Error, Result};

/// Position of one of the nine regions of a shifted tiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Placement {
    UpperLeft,
    Upper,
    UpperRight,
    Left,
    Center,
    Right,
    LowerLeft,
    Lower,
    LowerRight,
}

impl Placement {
    pub const ALL: [Placement; 9] = [
        Placement::UpperLeft,
        Placement::Upper,
        Placement::UpperRight,
        Placement::Left,
        Placement::Center,
        Placement::Right,
        Placement::LowerLeft,
        Placement::Lower,
        Placement::LowerRight,
    ];

    pub fn from_bands(rows: Band, cols: Band) -> Self {
        use Band::*;
        match (rows, cols) {
            (Leading, Leading) => Placement::UpperLeft,
            (Leading, Full) => Placement::Upper,
            (Leading, Trailing) => Placement::UpperRight,
            (Full, Leading) => Placement::Left,
            (Full, Full) => Placement::Center,
            (Full, Trailing) => Placement::Right,
            (Trailing, Leading) => Placement::LowerLeft,
            (Trailing, Full) => Placement::Lower,
            (Trailing, Trailing) => Placement::LowerRight,
        }
    }

    fn bands(self) -> (Band, Band) {
        use Band::*;
        match self {
            Placement::UpperLeft => (Leading, Leading),
            Placement::Upper => (Leading, Full),
            Placement::UpperRight => (Leading, Trailing),
            Placement::Left => (Full, Leading),
            Placement::Center => (Full, Full),
            Placement::Right => (Full, Trailing),
            Placement::LowerLeft => (Trailing, Leading),
            Placement::Lower => (Trailing, Full),
            Placement::LowerRight => (Trailing, Trailing),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub placement: Placement,
    pub shape: (usize, usize),
    /// `(r_off, c_off)` into the center window.
    pub offset: (usize, usize),
}

impl Region {
    pub fn tokens(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    /// Flat center-window token index of local token `p` (row-major inside the region).
    pub fn center_token(&self, p: usize, window_cols: usize) -> usize {
        let (x, y) = (p / self.shape.1, p % self.shape.1);
        (self.offset.0 + x) * window_cols + self.offset.1 + y
    }
}

/// Nine-region description of a shifted tiling whose leading partial band is
/// `partial` and whose trailing band holds the remainder of one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftGroupPlan {
    window: (usize, usize),
    partial: (usize, usize),
    regions: [Region; 9],
}

pub fn build_shift_plan(window: (usize, usize), partial: (usize, usize)) -> Result<ShiftGroupPlan> {
    let (h, w) = window;
    let (th, tw) = partial;
    if th == 0 || th >= h || tw == 0 || tw >= w {
        return Err(Error::Invalid(format!(
            "partial extent {:?} must lie strictly inside window {:?}",
            partial, window
        )));
    }
    let axis = |band: Band, full: usize, t: usize| -> (usize, usize) {
        match band {
            Band::Leading => (t, full - t),
            Band::Full => (full, 0),
            Band::Trailing => (full - t, 0),
        }
    };
    let regions = Placement::ALL.map(|placement| {
        let (rb, cb) = placement.bands();
        let (gh, r_off) = axis(rb, h, th);
        let (gw, c_off) = axis(cb, w, tw);
        Region { placement, shape: (gh, gw), offset: (r_off, c_off) }
    });
    Ok(ShiftGroupPlan { window, partial, regions })
}

impl ShiftGroupPlan {
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn partial(&self) -> (usize, usize) {
        self.partial
    }

    pub fn regions(&self) -> &[Region; 9] {
        &self.regions
    }

    pub fn region(&self, placement: Placement) -> &Region {
        self.regions.iter().find(|r| r.placement == placement).expect("all placements present")
    }

    /// Sub-weight of one head for `region`, copied from center weights laid out `[n, n, K]`.
    pub fn slice_weight(&self, region: &Region, center: &[f64], heads: usize, head: usize) -> Vec<f64> {
        let n = self.window.0 * self.window.1;
        debug_assert_eq!(center.len(), n * n * heads);
        let m = region.tokens();
        let mut out = Vec::with_capacity(m * m);
        for p in 0..m {
            let pc = region.center_token(p, self.window.1);
            for q in 0..m {
                let qc = region.center_token(q, self.window.1);
                out.push(center[(pc * n + qc) * heads + head]);
            }
        }
        out
    }

    /// Sub-bias of one head for `region`, from a center bias laid out `[n, K]`.
    pub fn slice_bias(&self, region: &Region, center: &[f64], heads: usize, head: usize) -> Vec<f64> {
        (0..region.tokens())
            .map(|p| center[region.center_token(p, self.window.1) * heads + head])
            .collect()
    }
}
