//! U-/V-disparity histograms and cylindrical obstacle extraction.
//!
//! The U-map counts, for every image column, how often each disparity
//! occurs (a bird's-eye view); the V-map does the same per image row (a side
//! view in which the ground shows up as a slanted line). Both are blurred,
//! thresholded and dilated into binary maps whose 8-connected blobs become
//! obstacles: a U-blob fixes the column extent and disparity, an
//! overlapping V-blob fixes the row extent.

use image::{DynamicImage, Rgb, RgbImage};

use crate::contour::{extract_contours, BinaryMap, Contour};
use crate::error::{Error, Result};
use crate::imgio::{disparity_color, DisparityMap};
use crate::rectify::StereoCalibration;

/// Per-column disparity histogram, stored as `d_max` rows of `width` bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UMap {
    width: usize,
    d_max: usize,
    counts: Vec<u32>,
}

/// Per-row disparity histogram, stored as `height` rows of `d_max` bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VMap {
    height: usize,
    d_max: usize,
    counts: Vec<u32>,
}

impl UMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn count(&self, u: usize, d: usize) -> u32 {
        self.counts[d * self.width + u]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

impl VMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn count(&self, d: usize, v: usize) -> u32 {
        self.counts[v * self.d_max + d]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Histogram a disparity map into its U- and V-maps.
///
/// Fractional disparities fall into the bin of their integer part.
pub fn build_uvmaps(d: &DisparityMap, d_max: usize) -> Result<(UMap, VMap)> {
    let (w, h) = (d.width(), d.height());
    let mut u = UMap {
        width: w,
        d_max,
        counts: vec![0; w * d_max],
    };
    let mut v = VMap {
        height: h,
        d_max,
        counts: vec![0; h * d_max],
    };
    for y in 0..h {
        for x in 0..w {
            let Some(value) = d.get(x, y) else { continue };
            if !(value >= 0.0 && value < d_max as f32) {
                return Err(Error::Range(format!(
                    "disparity {value} at ({x}, {y}) outside [0, {d_max})"
                )));
            }
            let bin = value as usize;
            u.counts[bin * w + x] += 1;
            v.counts[y * d_max + bin] += 1;
        }
    }
    Ok((u, v))
}

/// Clean-up parameters for turning a histogram into a binary map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    /// Minimum (blurred) count for a bin to be set.
    pub count_threshold: f32,
    pub dilate_radius: usize,
    /// Gaussian σ in bins; 0 disables the blur.
    pub blur_sigma: f32,
    /// Bins below this disparity are outside the region of interest.
    pub d_roi_min: usize,
    /// Half-width in bins of the suppressed ground band (V-map only);
    /// `None` disables ground suppression.
    pub ground_band: Option<usize>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            count_threshold: 12.0,
            dilate_radius: 1,
            blur_sigma: 1.0,
            d_roi_min: 2,
            ground_band: Some(2),
        }
    }
}

impl CleanConfig {
    /// Plain thresholding with no blur, dilation or region of interest.
    pub fn threshold_only(count_threshold: f32) -> Self {
        Self {
            count_threshold,
            dilate_radius: 0,
            blur_sigma: 0.0,
            d_roi_min: 0,
            ground_band: None,
        }
    }
}

/// The ground line `d = slope * v + intercept` found in a V-map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundLine {
    pub slope: f64,
    pub intercept: f64,
}

impl GroundLine {
    pub fn disparity_at(&self, v: usize) -> f64 {
        self.slope * v as f64 + self.intercept
    }
}

/// A histogram laid out as a 2-D grid with one disparity axis.
pub trait DisparityHistogram {
    fn grid_size(&self) -> (usize, usize);
    fn grid_count(&self, x: usize, y: usize) -> u32;
    /// Disparity of grid cell `(x, y)`.
    fn disparity_of(&self, x: usize, y: usize) -> usize;
    /// Ground line to suppress, if this view shows one.
    fn ground(&self, _band: usize) -> Option<GroundLine> {
        None
    }
    /// Whether cell `(x, y)` is ground or lies beyond it.
    fn below_ground(&self, _ground: &GroundLine, _band: usize, _x: usize, _y: usize) -> bool {
        false
    }
}

impl DisparityHistogram for UMap {
    fn grid_size(&self) -> (usize, usize) {
        (self.width, self.d_max)
    }

    fn grid_count(&self, x: usize, y: usize) -> u32 {
        self.count(x, y)
    }

    fn disparity_of(&self, _x: usize, y: usize) -> usize {
        y
    }
}

impl DisparityHistogram for VMap {
    fn grid_size(&self) -> (usize, usize) {
        (self.d_max, self.height)
    }

    fn grid_count(&self, x: usize, y: usize) -> u32 {
        self.count(x, y)
    }

    fn disparity_of(&self, x: usize, _y: usize) -> usize {
        x
    }

    fn ground(&self, band: usize) -> Option<GroundLine> {
        fit_ground_line(self, band)
    }

    fn below_ground(&self, ground: &GroundLine, band: usize, x: usize, y: usize) -> bool {
        let g = ground.disparity_at(y);
        g >= 0.0 && (x as f64) <= g + band as f64
    }
}

/// Fit the ground line through the dominant per-row V-map maxima.
///
/// Candidate points are `(v, argmax_d)` for rows whose peak count reaches
/// half of the strongest row peak. Every pair of candidates proposes a line;
/// the one with the largest count-weighted support within `band` bins wins
/// and is refined by least squares over its inliers. Lines that do not
/// increase in disparity towards the bottom of the image are rejected.
pub fn fit_ground_line(v: &VMap, band: usize) -> Option<GroundLine> {
    let peaks: Vec<(usize, usize, u32)> = (0..v.height)
        .filter_map(|row| {
            let bins = &v.counts[row * v.d_max..(row + 1) * v.d_max];
            // Disparity 0 is the far field and carries no ground slope.
            let (d, &c) = bins.iter().enumerate().skip(1).max_by_key(|&(d, &c)| (c, std::cmp::Reverse(d)))?;
            (c > 0).then_some((row, d, c))
        })
        .collect();
    let strongest = peaks.iter().map(|p| p.2).max()?;
    let points: Vec<(f64, f64, f64)> = peaks
        .into_iter()
        .filter(|p| 2 * p.2 >= strongest)
        .map(|(row, d, c)| (row as f64, d as f64, f64::from(c)))
        .collect();
    if points.len() < 4 {
        return None;
    }
    let tol = band as f64 + 0.5;
    let support = |slope: f64, intercept: f64| -> f64 {
        points
            .iter()
            .filter(|(r, d, _)| (slope * r + intercept - d).abs() <= tol)
            .map(|p| p.2)
            .sum()
    };
    let mut best: Option<(f64, f64, f64)> = None;
    let stride = points.len().div_ceil(96).max(1);
    for i in (0..points.len()).step_by(stride) {
        for j in (i + 1..points.len()).step_by(stride) {
            let (r0, d0, _) = points[i];
            let (r1, d1, _) = points[j];
            if d1 <= d0 {
                continue;
            }
            let slope = (d1 - d0) / (r1 - r0);
            let intercept = d0 - slope * r0;
            let s = support(slope, intercept);
            if best.is_none_or(|b| s > b.2) {
                best = Some((slope, intercept, s));
            }
        }
    }
    let (slope, intercept, _) = best?;
    let inliers: Vec<&(f64, f64, f64)> = points
        .iter()
        .filter(|(r, d, _)| (slope * r + intercept - d).abs() <= tol)
        .collect();
    if inliers.len() < 4 {
        return None;
    }
    let wsum: f64 = inliers.iter().map(|p| p.2).sum();
    let mr = inliers.iter().map(|p| p.2 * p.0).sum::<f64>() / wsum;
    let md = inliers.iter().map(|p| p.2 * p.1).sum::<f64>() / wsum;
    let srr: f64 = inliers.iter().map(|p| p.2 * (p.0 - mr).powi(2)).sum();
    let srd: f64 = inliers.iter().map(|p| p.2 * (p.0 - mr) * (p.1 - md)).sum();
    if srr <= 0.0 {
        return None;
    }
    let slope = srd / srr;
    (slope > 0.0).then_some(GroundLine {
        slope,
        intercept: md - slope * mr,
    })
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

fn blur(grid: &[f32], w: usize, h: usize, sigma: f32) -> Vec<f32> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as isize + i as isize - r;
                if (0..w as isize).contains(&xx) {
                    acc += kv * grid[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - r;
                if (0..h as isize).contains(&yy) {
                    acc += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn dilate(bin: &BinaryMap, radius: usize) -> BinaryMap {
    if radius == 0 {
        return bin.clone();
    }
    let (w, h) = (bin.width(), bin.height());
    let mut out = BinaryMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !bin.get(x, y) {
                continue;
            }
            for yy in y.saturating_sub(radius)..=(y + radius).min(h - 1) {
                for xx in x.saturating_sub(radius)..=(x + radius).min(w - 1) {
                    out.set(xx, yy, true);
                }
            }
        }
    }
    out
}

/// Blur, threshold, dilate, then clear everything outside the region of
/// interest.
pub fn binarize_and_clean<H: DisparityHistogram>(map: &H, cfg: &CleanConfig) -> BinaryMap {
    let (w, h) = map.grid_size();
    let mut grid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            grid.push(map.grid_count(x, y) as f32);
        }
    }
    if cfg.blur_sigma > 0.0 {
        grid = blur(&grid, w, h, cfg.blur_sigma);
    }
    let mut bin = BinaryMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if grid[y * w + x] >= cfg.count_threshold {
                bin.set(x, y, true);
            }
        }
    }
    let mut bin = dilate(&bin, cfg.dilate_radius);
    let ground = cfg.ground_band.and_then(|band| map.ground(band).map(|g| (g, band)));
    for y in 0..h {
        for x in 0..w {
            let outside = map.disparity_of(x, y) < cfg.d_roi_min
                || ground.is_some_and(|(g, band)| map.below_ground(&g, band, x, y));
            if outside {
                bin.set(x, y, false);
            }
        }
    }
    bin
}

/// A detected obstacle modelled as an upright cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    /// Count-weighted mean disparity of the U-map blob.
    pub disparity: f64,
    pub u_min: usize,
    pub u_max: usize,
    pub v_min: usize,
    pub v_max: usize,
    pub depth_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl std::fmt::Display for Obstacle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "obstacle d={:.2} u=[{},{}] v=[{},{}] depth={:.3}",
            self.disparity, self.u_min, self.u_max, self.v_min, self.v_max, self.depth_m
        )
    }
}

fn interval_overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if hi >= lo {
        hi - lo + 1
    } else {
        0
    }
}

/// Pair U-blobs with V-blobs and turn each pair into an [`Obstacle`].
///
/// `umap` supplies the counts that weight the representative disparity.
/// U-blobs without a V-blob sharing at least one disparity bin are dropped,
/// as are blobs whose representative disparity is not positive.
pub fn fit_obstacles(
    umap: &UMap,
    u_contours: &[Contour],
    v_contours: &[Contour],
    calib: &StereoCalibration,
) -> Vec<Obstacle> {
    let mut out = Vec::new();
    for uc in u_contours {
        let (mut weight, mut moment) = (0.0f64, 0.0f64);
        for &(u, d) in uc.pixels() {
            let c = f64::from(umap.count(u, d));
            weight += c;
            moment += c * d as f64;
        }
        let disparity = if weight > 0.0 { moment / weight } else { uc.centroid().1 };
        if !(disparity > 0.0) {
            continue;
        }
        let bbox = uc.bbox();
        let d_range = (bbox.y0, bbox.y1);
        let best = v_contours
            .iter()
            .map(|vc| (interval_overlap(d_range, (vc.bbox().x0, vc.bbox().x1)), vc))
            .filter(|(overlap, _)| *overlap >= 1)
            .fold(None::<(usize, &Contour)>, |best, (overlap, vc)| match best {
                Some((bo, bc)) if (bo, bc.area()) >= (overlap, vc.area()) => Some((bo, bc)),
                _ => Some((overlap, vc)),
            });
        let Some((_, vc)) = best else { continue };
        let depth_m = calib.fb() / disparity;
        let (u_min, u_max) = (bbox.x0, bbox.x1);
        let (v_min, v_max) = (vc.bbox().y0, vc.bbox().y1);
        out.push(Obstacle {
            disparity,
            u_min,
            u_max,
            v_min,
            v_max,
            depth_m,
            width_m: depth_m * (u_max - u_min) as f64 / calib.focal_px,
            height_m: depth_m * (v_max - v_min) as f64 / calib.focal_px,
        });
    }
    out
}

/// Settings for the full detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub u_clean: CleanConfig,
    pub v_clean: CleanConfig,
    pub min_area: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            u_clean: CleanConfig {
                ground_band: None,
                ..CleanConfig::default()
            },
            v_clean: CleanConfig::default(),
            min_area: 6,
        }
    }
}

/// Everything produced while detecting obstacles in one frame.
#[derive(Debug, Clone)]
pub struct Detection {
    pub umap: UMap,
    pub vmap: VMap,
    pub u_binary: BinaryMap,
    pub v_binary: BinaryMap,
    pub u_contours: Vec<Contour>,
    pub v_contours: Vec<Contour>,
    pub obstacles: Vec<Obstacle>,
}

pub fn detect_obstacles(d: &DisparityMap, calib: &StereoCalibration, cfg: &DetectionConfig) -> Result<Detection> {
    let (umap, vmap) = build_uvmaps(d, calib.d_max)?;
    let u_binary = binarize_and_clean(&umap, &cfg.u_clean);
    let v_binary = binarize_and_clean(&vmap, &cfg.v_clean);
    let u_contours = extract_contours(&u_binary, cfg.min_area);
    let v_contours = extract_contours(&v_binary, cfg.min_area);
    let obstacles = fit_obstacles(&umap, &u_contours, &v_contours, calib);
    Ok(Detection {
        umap,
        vmap,
        u_binary,
        v_binary,
        u_contours,
        v_contours,
        obstacles,
    })
}

fn histogram_shade(count: u32, peak: u32) -> u8 {
    if peak == 0 {
        return 0;
    }
    (255.0 * (f64::from(count) / f64::from(peak)).sqrt()).round() as u8
}

/// Render a histogram as a grayscale image (square-root scaled).
pub fn histogram_image<H: DisparityHistogram>(map: &H) -> DynamicImage {
    let (w, h) = map.grid_size();
    let peak = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| map.grid_count(x, y))
        .max()
        .unwrap_or(0);
    let img = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([histogram_shade(map.grid_count(x as usize, y as usize), peak)])
    });
    DynamicImage::ImageLuma8(img)
}

/// Composite view: colorized disparity with the U-map above it and the V-map
/// to its right. Binary blobs are tinted and obstacle boxes drawn in white.
pub fn annotate(d: &DisparityMap, det: &Detection, d_max: usize) -> RgbImage {
    let (w, h) = (d.width(), d.height());
    let mut out = RgbImage::new((w + d_max) as u32, (d_max + h) as u32);
    let upeak = det.umap.counts.iter().copied().max().unwrap_or(0);
    for dd in 0..d_max {
        for u in 0..w {
            let g = histogram_shade(det.umap.count(u, dd), upeak);
            let px = if det.u_binary.get(u, dd) { Rgb([g, g / 2, 255]) } else { Rgb([g, g, g]) };
            out.put_pixel(u as u32, dd as u32, px);
        }
    }
    let vpeak = det.vmap.counts.iter().copied().max().unwrap_or(0);
    for v in 0..h {
        for dd in 0..d_max {
            let g = histogram_shade(det.vmap.count(dd, v), vpeak);
            let px = if det.v_binary.get(dd, v) { Rgb([g, g / 2, 255]) } else { Rgb([g, g, g]) };
            out.put_pixel((w + dd) as u32, (d_max + v) as u32, px);
        }
    }
    for y in 0..h {
        for x in 0..w {
            if let Some(v) = d.get(x, y) {
                out.put_pixel(x as u32, (d_max + y) as u32, disparity_color(v, d_max));
            }
        }
    }
    let white = Rgb([255, 255, 255]);
    for ob in &det.obstacles {
        for x in ob.u_min..=ob.u_max.min(w - 1) {
            out.put_pixel(x as u32, (d_max + ob.v_min) as u32, white);
            out.put_pixel(x as u32, (d_max + ob.v_max.min(h - 1)) as u32, white);
        }
        for y in ob.v_min..=ob.v_max.min(h - 1) {
            out.put_pixel(ob.u_min as u32, (d_max + y) as u32, white);
            out.put_pixel(ob.u_max.min(w - 1) as u32, (d_max + y) as u32, white);
        }
    }
    out
}
