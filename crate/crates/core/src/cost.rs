//! Pixel-wise matching costs.
//!
//! `C(p, d)` compares left pixel `p` with right pixel `(p.x - d, p.y)`.
//! Coordinates that fall off the image are clamped to the border so the
//! volume stays dense; the left-right check is responsible for discarding
//! unmatched pixels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// A `width × height × d_max` cost array, disparity innermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVolume<T = u16> {
    width: usize,
    height: usize,
    d_max: usize,
    costs: Vec<T>,
}

/// Sum of directional path costs.
pub type AggregatedVolume = CostVolume<u32>;

impl<T: Copy> CostVolume<T> {
    pub fn new(width: usize, height: usize, d_max: usize, costs: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || d_max == 0 {
            return Err(Error::Range(format!("empty volume {width}x{height}x{d_max}")));
        }
        if costs.len() != width * height * d_max {
            return Err(Error::Dimension(format!(
                "{} costs for a {width}x{height}x{d_max} volume",
                costs.len()
            )));
        }
        Ok(Self {
            width,
            height,
            d_max,
            costs,
        })
    }

    pub fn filled(width: usize, height: usize, d_max: usize, value: T) -> Result<Self> {
        Self::new(width, height, d_max, vec![value; width * height * d_max])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    pub fn into_costs(self) -> Vec<T> {
        self.costs
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> T {
        self.costs[(y * self.width + x) * self.d_max + d]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: usize, v: T) {
        self.costs[(y * self.width + x) * self.d_max + d] = v;
    }

    /// All disparities of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.d_max;
        &self.costs[i..i + self.d_max]
    }

    /// One image row, `width * d_max` values.
    pub fn row(&self, y: usize) -> &[T] {
        let n = self.width * self.d_max;
        &self.costs[y * n..(y + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.costs.chunks_exact(self.width * self.d_max)
    }
}

/// Census descriptors, one bit per window neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusImage {
    width: usize,
    height: usize,
    descriptors: Vec<u32>,
}

impl CensusImage {
    pub fn new(width: usize, height: usize, descriptors: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || descriptors.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} descriptors for {width}x{height}",
                descriptors.len()
            )));
        }
        Ok(Self {
            width,
            height,
            descriptors,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn descriptors(&self) -> &[u32] {
        &self.descriptors
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.descriptors[y * self.width + x]
    }
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Census transform over a `(2r+1)²` window with replicated borders.
///
/// Bit `k` is set iff the `k`-th neighbour in row-major window order (the
/// centre skipped) is strictly darker than the centre. `radius` must be 1 or
/// 2 so the descriptor fits in 24 bits.
pub fn census_transform(img: &GrayImage, radius: usize) -> Result<CensusImage> {
    if !(1..=2).contains(&radius) {
        return Err(Error::Parameter(format!("census radius {radius} must be 1 or 2")));
    }
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    let mut descriptors = vec![0u32; w * h];
    descriptors
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, out)| {
            let rows: Vec<&[u8]> = (-r..=r)
                .map(|dy| img.row(clamp_index(y as isize + dy, h)))
                .collect();
            for (x, desc) in out.iter_mut().enumerate() {
                let center = img.get(x, y);
                let mut bits = 0u32;
                let mut k = 0;
                for (j, row) in rows.iter().enumerate() {
                    for dx in -r..=r {
                        if j == radius && dx == 0 {
                            continue;
                        }
                        if row[clamp_index(x as isize + dx, w)] < center {
                            bits |= 1 << k;
                        }
                        k += 1;
                    }
                }
                *desc = bits;
            }
        });
    CensusImage::new(w, h, descriptors)
}

/// Hamming distance between left descriptors and right descriptors shifted
/// by each candidate disparity.
pub fn cost_census(left: &CensusImage, right: &CensusImage, d_max: usize) -> Result<CostVolume> {
    if left.width != right.width || left.height != right.height {
        return Err(Error::Dimension(format!(
            "census images {}x{} vs {}x{}",
            left.width, left.height, right.width, right.height
        )));
    }
    if d_max == 0 {
        return Err(Error::Parameter("d_max must be >= 1".into()));
    }
    let w = left.width;
    let mut costs = vec![0u16; w * left.height * d_max];
    costs
        .par_chunks_mut(w * d_max)
        .enumerate()
        .for_each(|(y, out)| {
            let l = &left.descriptors[y * w..(y + 1) * w];
            let r = &right.descriptors[y * w..(y + 1) * w];
            for (x, px) in out.chunks_exact_mut(d_max).enumerate() {
                for (d, c) in px.iter_mut().enumerate() {
                    let xr = x.saturating_sub(d);
                    *c = (l[x] ^ r[xr]).count_ones() as u16;
                }
            }
        });
    CostVolume::new(w, left.height, d_max, costs)
}

/// Sum of absolute differences over a `(2r+1)²` window, saturating at
/// `u16::MAX`.
///
/// Window coordinates are clamped first and the shifted right column
/// `x' - d` is clamped at zero.
pub fn cost_sad(left: &GrayImage, right: &GrayImage, d_max: usize, radius: usize) -> Result<CostVolume> {
    if !left.same_size(right) {
        return Err(Error::Dimension(format!(
            "images {}x{} vs {}x{}",
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    if d_max == 0 {
        return Err(Error::Parameter("d_max must be >= 1".into()));
    }
    let (w, h) = (left.width(), left.height());
    let r = radius as isize;
    let mut costs = vec![0u16; w * h * d_max];
    costs
        .par_chunks_mut(w * d_max)
        .enumerate()
        .for_each(|(y, out)| {
            let rows: Vec<usize> = (-r..=r).map(|dy| clamp_index(y as isize + dy, h)).collect();
            let mut column = vec![0u32; w];
            for d in 0..d_max {
                for (xs, col) in column.iter_mut().enumerate() {
                    let xr = xs.saturating_sub(d);
                    *col = rows
                        .iter()
                        .map(|&yy| u32::from(left.get(xs, yy).abs_diff(right.get(xr, yy))))
                        .sum();
                }
                for x in 0..w {
                    let sum: u32 = (-r..=r)
                        .map(|dx| column[clamp_index(x as isize + dx, w)])
                        .sum();
                    out[x * d_max + d] = sum.min(u32::from(u16::MAX)) as u16;
                }
            }
        });
    CostVolume::new(w, h, d_max, costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |_, _| rng.random()).unwrap()
    }

    fn naive_census(img: &GrayImage, x: usize, y: usize) -> u32 {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let c = img.get(x, y);
        let mut bits = 0;
        let mut k = 0;
        for dy in -2isize..=2 {
            for dx in -2isize..=2 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let xx = (x as isize + dx).clamp(0, w - 1) as usize;
                let yy = (y as isize + dy).clamp(0, h - 1) as usize;
                if img.get(xx, yy) < c {
                    bits |= 1 << k;
                }
                k += 1;
            }
        }
        bits
    }

    #[test]
    fn census_constant_image_is_zero() {
        let img = GrayImage::filled(9, 7, 42).unwrap();
        let ct = census_transform(&img, 2).unwrap();
        assert!(ct.descriptors().iter().all(|&d| d == 0));
    }

    #[test]
    fn census_single_darker_neighbour() {
        let mut img = GrayImage::filled(5, 5, 200).unwrap();
        img.set(2, 2, 100);
        img.set(0, 1, 99);
        let ct = census_transform(&img, 2).unwrap();
        assert_eq!(ct.get(2, 2).count_ones(), 1);
        // (0, 1) is the 5th neighbour in row-major order.
        assert_eq!(ct.get(2, 2), 1 << 5);
    }

    #[test]
    fn census_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = random_image(&mut rng, 16, 16);
        let ct = census_transform(&img, 2).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(ct.get(x, y), naive_census(&img, x, y), "({x},{y})");
                assert_eq!(ct.get(x, y) >> 24, 0);
            }
        }
    }

    #[test]
    fn census_rejects_wide_radius() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        assert!(matches!(census_transform(&img, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn census_cost_identical_and_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 12, 6);
        let ct = census_transform(&img, 2).unwrap();
        let vol = cost_census(&ct, &ct, 4).unwrap();
        for y in 0..6 {
            for x in 0..12 {
                assert_eq!(vol.get(x, y, 0), 0);
            }
        }
        let a = CensusImage::new(1, 1, vec![0x00a5_5a3c]).unwrap();
        let b = CensusImage::new(1, 1, vec![!0x00a5_5a3c & 0x00ff_ffff]).unwrap();
        assert_eq!(cost_census(&a, &b, 1).unwrap().get(0, 0, 0), 24);
    }

    #[test]
    fn sad_constant_images() {
        let l = GrayImage::filled(10, 8, 10).unwrap();
        let r = GrayImage::filled(10, 8, 12).unwrap();
        let vol = cost_sad(&l, &r, 5, 2).unwrap();
        assert!(vol.costs().iter().all(|&c| c == 50));
        let same = cost_sad(&l, &l, 5, 2).unwrap();
        assert!(same.costs().iter().step_by(5).all(|&c| c == 0));
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = GrayImage::filled(4, 4, 0).unwrap();
        let b = GrayImage::filled(5, 4, 0).unwrap();
        assert!(matches!(cost_sad(&a, &b, 2, 2), Err(Error::Dimension(_))));
        let ca = census_transform(&a, 2).unwrap();
        let cb = census_transform(&b, 2).unwrap();
        assert!(matches!(cost_census(&ca, &cb, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn sad_saturates() {
        // A 5x5 window of 255 differences is 6375; widen the window to overflow.
        let l = GrayImage::filled(40, 40, 255).unwrap();
        let r = GrayImage::filled(40, 40, 0).unwrap();
        let vol = cost_sad(&l, &r, 1, 16).unwrap();
        assert!(vol.costs().iter().all(|&c| c == u16::MAX));
    }
}
