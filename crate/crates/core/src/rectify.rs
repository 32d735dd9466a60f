//! Rectification by integer lookup maps.
//!
//! Every output pixel `p` is gathered from the source at
//! `(mx(p), my(p))`. The streaming variant consumes source rows in order and
//! keeps only the rows inside the vertical displacement window.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Rig geometry shared by the pipeline, the detector and the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCalibration {
    pub baseline_m: f64,
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub d_max: usize,
}

impl StereoCalibration {
    pub fn new(baseline_m: f64, focal_px: f64, cx: f64, cy: f64, d_max: usize) -> Result<Self> {
        let calib = Self {
            baseline_m,
            focal_px,
            cx,
            cy,
            d_max,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_m > 0.0 && self.baseline_m.is_finite()) {
            return Err(Error::Parameter(format!("baseline {} must be > 0", self.baseline_m)));
        }
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(Error::Parameter(format!("focal length {} must be > 0", self.focal_px)));
        }
        if self.d_max == 0 || self.d_max > 256 {
            return Err(Error::Parameter(format!("d_max {} must be in 1..=256", self.d_max)));
        }
        Ok(())
    }

    /// `f * b`, the disparity-depth product.
    pub fn fb(&self) -> f64 {
        self.focal_px * self.baseline_m
    }

    pub fn depth_for(&self, disparity: f64) -> f64 {
        self.fb() / disparity
    }
}

/// Per-pixel source coordinates for one camera.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RectificationMaps {
    width: usize,
    height: usize,
    mx: Vec<u16>,
    my: Vec<u16>,
}

const RMAP_HEADER: usize = 8;

impl RectificationMaps {
    pub fn new(width: usize, height: usize, mx: Vec<u16>, my: Vec<u16>) -> Result<Self> {
        let n = width * height;
        if n == 0 || mx.len() != n || my.len() != n {
            return Err(Error::Dimension(format!(
                "maps of {}/{} entries for {width}x{height}",
                mx.len(),
                my.len()
            )));
        }
        Ok(Self { width, height, mx, my })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        let mx = (0..height).flat_map(|_| (0..width).map(|x| x as u16)).collect();
        let my = (0..height).flat_map(|y| std::iter::repeat_n(y as u16, width)).collect();
        Self { width, height, mx, my }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (u16, u16)) -> Result<Self> {
        let mut mx = Vec::with_capacity(width * height);
        let mut my = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = f(x, y);
                mx.push(sx);
                my.push(sy);
            }
        }
        Self::new(width, height, mx, my)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn source(&self, x: usize, y: usize) -> (usize, usize) {
        let i = y * self.width + x;
        (usize::from(self.mx[i]), usize::from(self.my[i]))
    }

    /// Largest vertical displacement `|my(x, y) - y|` over the map.
    pub fn max_vertical_shift(&self) -> usize {
        self.my
            .chunks_exact(self.width)
            .enumerate()
            .flat_map(|(y, row)| row.iter().map(move |&sy| usize::from(sy).abs_diff(y)))
            .max()
            .unwrap_or(0)
    }

    /// Parse the `.rmap` sidecar: `u32` LE width and height, then the x and
    /// y planes as little-endian `u16`.
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < RMAP_HEADER {
            return Err("truncated header".into());
        }
        let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0)
            .ok_or("empty or oversized map")?;
        if bytes.len() != RMAP_HEADER + 4 * n {
            return Err(format!(
                "expected {} bytes for {width}x{height}, found {}",
                RMAP_HEADER + 4 * n,
                bytes.len()
            ));
        }
        let plane = |k: usize| -> Vec<u16> {
            bytes[RMAP_HEADER + 2 * n * k..RMAP_HEADER + 2 * n * (k + 1)]
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        };
        Self::new(width, height, plane(0), plane(1)).map_err(|e| e.to_string())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RMAP_HEADER + 4 * self.mx.len());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in self.mx.iter().chain(&self.my) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| Error::decode(path, reason))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    fn check_bounds(&self, src_w: usize, src_h: usize) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = self.source(x, y);
                if sx >= src_w || sy >= src_h {
                    return Err(Error::Range(format!(
                        "map entry ({sx}, {sy}) at pixel ({x}, {y}) outside {src_w}x{src_h} source"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Random-access gather: `out(p) = img(mx(p), my(p))`.
pub fn apply_rectification(img: &GrayImage, maps: &RectificationMaps) -> Result<GrayImage> {
    maps.check_bounds(img.width(), img.height())?;
    let mut data = Vec::with_capacity(maps.width * maps.height);
    for (&sx, &sy) in maps.mx.iter().zip(&maps.my) {
        data.push(img.get(usize::from(sx), usize::from(sy)));
    }
    GrayImage::new(maps.width, maps.height, data)
}

/// Line-buffered rectifier.
///
/// Output row `y` is emitted once source row `y + depth` (or the last row)
/// has arrived. The ring buffer keeps source rows `y - depth ..= y + depth`,
/// so at most `2 * depth + 1` rows are held at any time.
#[derive(Debug)]
pub struct StreamingRectifier<'a> {
    maps: &'a RectificationMaps,
    depth: usize,
    rows: VecDeque<Vec<u8>>,
    first_row: usize,
    received: usize,
    next_out: usize,
    peak_rows: usize,
}

impl<'a> StreamingRectifier<'a> {
    /// The source is expected to have the same size as the maps.
    pub fn new(maps: &'a RectificationMaps, depth: usize) -> Self {
        Self {
            maps,
            depth,
            rows: VecDeque::with_capacity(2 * depth + 1),
            first_row: 0,
            received: 0,
            next_out: 0,
            peak_rows: 0,
        }
    }

    /// Most source rows buffered simultaneously so far.
    pub fn peak_rows(&self) -> usize {
        self.peak_rows
    }

    /// Feed the next source row; returns any output rows that became ready.
    pub fn push_row(&mut self, row: &[u8]) -> Result<Vec<Vec<u8>>> {
        if row.len() != self.maps.width {
            return Err(Error::Dimension(format!(
                "row of {} pixels, maps are {} wide",
                row.len(),
                self.maps.width
            )));
        }
        if self.received >= self.maps.height {
            return Err(Error::Range(format!("more than {} source rows", self.maps.height)));
        }
        self.rows.push_back(row.to_vec());
        self.received += 1;
        self.peak_rows = self.peak_rows.max(self.rows.len());
        let mut ready = Vec::new();
        while self.next_out < self.maps.height && self.next_out + self.depth < self.received {
            ready.push(self.emit()?);
        }
        Ok(ready)
    }

    /// Flush the remaining output rows after the last source row.
    pub fn finish(mut self) -> Result<Vec<Vec<u8>>> {
        if self.received != self.maps.height {
            return Err(Error::Dimension(format!(
                "stream ended after {} of {} rows",
                self.received, self.maps.height
            )));
        }
        let mut ready = Vec::new();
        while self.next_out < self.maps.height {
            ready.push(self.emit()?);
        }
        Ok(ready)
    }

    fn emit(&mut self) -> Result<Vec<u8>> {
        let y = self.next_out;
        let lo = y.saturating_sub(self.depth);
        let hi = (y + self.depth).min(self.received - 1);
        let mut out = Vec::with_capacity(self.maps.width);
        for x in 0..self.maps.width {
            let (sx, sy) = self.maps.source(x, y);
            if sy < lo || sy > hi {
                return Err(Error::BufferDepth {
                    x,
                    y,
                    source_row: sy,
                    lo,
                    hi,
                });
            }
            if sx >= self.maps.width {
                return Err(Error::Range(format!("map entry x={sx} at pixel ({x}, {y}) out of bounds")));
            }
            out.push(self.rows[sy - self.first_row][sx]);
        }
        self.next_out += 1;
        // Rows no later output can reach.
        while self.first_row + self.depth < self.next_out && !self.rows.is_empty() {
            self.rows.pop_front();
            self.first_row += 1;
        }
        Ok(out)
    }
}

/// Rectify a forward-only row stream with a `depth`-row vertical window.
pub fn apply_rectification_streaming<'r>(
    rows: impl IntoIterator<Item = &'r [u8]>,
    maps: &RectificationMaps,
    depth: usize,
) -> Result<GrayImage> {
    let mut rect = StreamingRectifier::new(maps, depth);
    let mut data = Vec::with_capacity(maps.width * maps.height);
    for row in rows {
        for out in rect.push_row(row)? {
            data.extend_from_slice(&out);
        }
    }
    for out in rect.finish()? {
        data.extend_from_slice(&out);
    }
    GrayImage::new(maps.width, maps.height, data)
}
