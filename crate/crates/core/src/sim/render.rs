use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Scene, Vec3};
use crate::error::{Error, Result};
use crate::imgio::{DisparityMap, GrayImage};
use crate::rectify::StereoCalibration;

/// Default simulated rig: 256×160 px, f = 200 px, b = 0.2 m, d ∈ [0, 60).
pub fn sim_calibration() -> StereoCalibration {
    StereoCalibration {
        baseline_m: 0.2,
        focal_px: 200.0,
        cx: 127.5,
        cy: 79.5,
        d_max: 60,
    }
}

/// Sensor imperfections added to ideal disparities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub dropout: f64,
    pub seed: u64,
}

fn ray(calib: &StereoCalibration, u: usize, v: usize) -> Vec3 {
    Vec3::new(
        1.0,
        -(u as f64 - calib.cx) / calib.focal_px,
        -(v as f64 - calib.cy) / calib.focal_px,
    )
}

/// Depth map seen by the left camera at `eye`; rays run along +x so the
/// hit parameter is the depth.
fn depth_map(scene: &Scene, eye: Vec3, calib: &StereoCalibration, w: usize, h: usize) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            out.push(scene.cast(eye, ray(calib, u, v)).map(|(t, _)| t));
        }
    }
    out
}

/// Disparity seen from the left camera at `eye`.
///
/// Each hit at depth `Z` gives `round(f·b / Z)` clamped to `[0, d_max)`;
/// rays that leave the scene are invalid. With `noise`, every valid pixel
/// gets zero-mean Gaussian noise (re-rounded and clamped) and is then
/// dropped with probability `dropout`, drawing from a generator seeded by
/// `noise.seed` in raster order.
pub fn render_ideal_disparity(
    scene: &Scene,
    eye: Vec3,
    calib: &StereoCalibration,
    width: usize,
    height: usize,
    noise: Option<&NoiseModel>,
) -> Result<DisparityMap> {
    calib.validate()?;
    let top = (calib.d_max - 1) as f64;
    let quantise = |d: f64| d.round().clamp(0.0, top) as f32;
    let mut map = DisparityMap::invalid(width, height);
    let depths = depth_map(scene, eye, calib, width, height);
    let mut sampler = match noise {
        Some(n) => {
            if !(n.sigma >= 0.0) || !(0.0..=1.0).contains(&n.dropout) {
                return Err(Error::Parameter(format!("noise sigma {} / dropout {}", n.sigma, n.dropout)));
            }
            let normal = Normal::new(0.0, n.sigma).map_err(|e| Error::Parameter(e.to_string()))?;
            Some((ChaCha8Rng::seed_from_u64(n.seed), normal, n.dropout))
        }
        None => None,
    };
    for (i, z) in depths.into_iter().enumerate() {
        let Some(z) = z else { continue };
        let mut d = quantise(calib.fb() / z);
        if let Some((rng, normal, dropout)) = sampler.as_mut() {
            d = quantise(f64::from(d) + normal.sample(rng));
            if rng.random_bool(*dropout) {
                continue;
            }
        }
        map.set(i % width, i / width, d);
    }
    Ok(map)
}

// Value-noise octaves: lattice spacing (m) and amplitude.
const OCTAVES: [(f64, f64); 3] = [(0.04, 0.5), (0.12, 0.3), (0.4, 0.2)];

fn lattice(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for k in [ix, iy, iz] {
        h = (h ^ k as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
        h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 29;
    }
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn value_noise(p: Vec3, spacing: f64, seed: u64) -> f64 {
    let (fx, fy, fz) = (p.x / spacing, p.y / spacing, p.z / spacing);
    let (x0, y0, z0) = (fx.floor(), fy.floor(), fz.floor());
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty, tz) = (smooth(fx - x0), smooth(fy - y0), smooth(fz - z0));
    let (ix, iy, iz) = (x0 as i64, y0 as i64, z0 as i64);
    let mut acc = 0.0;
    for (dz, wz) in [(0, 1.0 - tz), (1, tz)] {
        for (dy, wy) in [(0, 1.0 - ty), (1, ty)] {
            for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
                acc += wx * wy * wz * lattice(ix + dx, iy + dy, iz + dz, seed);
            }
        }
    }
    acc
}

/// Surface intensity at world point `p` seen from `depth` metres. Octaves
/// finer than about two pixels fade out so distant surfaces do not alias.
pub fn texture(p: Vec3, depth: f64, focal_px: f64, seed: u64) -> u8 {
    let mut sum = 0.0;
    for (k, &(spacing, amp)) in OCTAVES.iter().enumerate() {
        let px = spacing * focal_px / depth;
        let fade = (px - 1.0).clamp(0.0, 1.0);
        if fade > 0.0 {
            sum += fade * amp * value_noise(p, spacing, seed.wrapping_add(k as u64));
        }
    }
    (128.0 + 110.0 * sum).round().clamp(0.0, 255.0) as u8
}

fn render_view(scene: &Scene, eye: Vec3, calib: &StereoCalibration, w: usize, h: usize, seed: u64) -> Result<GrayImage> {
    let mut data = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let dir = ray(calib, u, v);
            data.push(match scene.cast(eye, dir) {
                Some((t, _)) => texture(eye + dir * t, t, calib.focal_px, seed),
                None => 128,
            });
        }
    }
    GrayImage::new(w, h, data)
}

/// Textured left and right views. Both cameras ray-cast the same scene, so
/// a point at depth `Z` appears `f·b / Z` pixels further left in the right
/// view. Empty sky is mid-gray.
pub fn render_stereo_pair(
    scene: &Scene,
    eye: Vec3,
    calib: &StereoCalibration,
    width: usize,
    height: usize,
    texture_seed: u64,
) -> Result<(GrayImage, GrayImage)> {
    calib.validate()?;
    let right_eye = eye - Vec3::new(0.0, calib.baseline_m, 0.0);
    let left = render_view(scene, eye, calib, width, height, texture_seed)?;
    let right = render_view(scene, right_eye, calib, width, height, texture_seed)?;
    Ok((left, right))
}

/// Add seeded zero-mean Gaussian sensor noise of `sigma` gray levels.
pub fn add_sensor_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("sensor noise: sigma {sigma} must be finite and non-negative")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(format!("sensor noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}
