//! Semi-global cost aggregation and disparity post-processing.
//!
//! Each directional path cost follows
//!
//! ```text
//! L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d±1) + P1, min_k L(p-r, k) + P2) - min_k L(p-r, k)
//! ```
//!
//! with `L = C` where the path enters the image. Subtracting the previous
//! minimum keeps every `L` below `C + P2`, so 32-bit sums of up to eight
//! paths cannot overflow for 16-bit unary costs.
//!
//! [`aggregate`] runs the recurrence over the whole image and supports four
//! or eight paths. [`StreamingAggregator`] processes one image row at a time
//! with the four forward paths only and produces bit-identical output.

mod aggregate;
mod post;
mod stream;

pub use aggregate::aggregate;
pub use post::{lr_check, median_filter, wta, wta_right, wta_right_row, wta_row};
pub use stream::{aggregate_streaming, StreamingAggregator};

use crate::error::{Error, Result};

/// Number of aggregation directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathCount {
    /// 0°, 45°, 90°, 135°: all computable in one top-to-bottom pass.
    Four,
    /// The four forward paths plus their reverses.
    Eight,
}

impl PathCount {
    pub fn count(self) -> u32 {
        match self {
            PathCount::Four => 4,
            PathCount::Eight => 8,
        }
    }

    /// Path step vectors `r`; the predecessor of `p` is `p - r`.
    pub(crate) fn directions(self) -> &'static [(isize, isize)] {
        const ALL: [(isize, isize); 8] = [
            (1, 0),
            (1, 1),
            (0, 1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
            (0, -1),
            (1, -1),
        ];
        match self {
            PathCount::Four => &ALL[..4],
            PathCount::Eight => &ALL,
        }
    }
}

/// Smoothness penalties and path set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SgmParams {
    pub p1: u32,
    pub p2: u32,
    pub paths: PathCount,
}

/// Upper bound on `P2` that keeps eight 32-bit path sums from overflowing.
pub const MAX_P2: u32 = 1 << 24;

impl SgmParams {
    pub fn new(p1: u32, p2: u32, paths: PathCount) -> Result<Self> {
        let params = Self { p1, p2, paths };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 > self.p2 {
            return Err(Error::Parameter(format!(
                "P1 = {} must not exceed P2 = {}",
                self.p1, self.p2
            )));
        }
        if self.p2 > MAX_P2 {
            return Err(Error::Parameter(format!("P2 = {} exceeds {MAX_P2}", self.p2)));
        }
        Ok(())
    }
}
