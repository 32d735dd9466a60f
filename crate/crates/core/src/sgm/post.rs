use crate::cost::CostVolume;
use crate::error::{Error, Result};
use crate::imgio::DisparityMap;

#[inline]
fn argmin<T: Ord + Copy>(costs: impl Iterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (d, c) in costs.enumerate() {
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((d, c));
        }
    }
    best.map(|(d, _)| d)
}

/// Left-view winner-takes-all for one aggregated row.
pub fn wta_row<T: Ord + Copy>(row: &[T], d_max: usize) -> Vec<u16> {
    row.chunks_exact(d_max)
        .map(|px| argmin(px.iter().copied()).unwrap_or(0) as u16)
        .collect()
}

/// Right-view winner-takes-all for one aggregated row: for right column `x`
/// scan `C_aggr(x + d, d)` over the disparities that stay inside the row.
pub fn wta_right_row<T: Ord + Copy>(row: &[T], d_max: usize) -> Vec<Option<u16>> {
    let w = row.len() / d_max;
    (0..w)
        .map(|x| {
            let reach = d_max.min(w - x);
            argmin((0..reach).map(|d| row[(x + d) * d_max + d])).map(|d| d as u16)
        })
        .collect()
}

/// `D(p) = argmin_d C_aggr(p, d)`, ties to the smallest disparity.
pub fn wta<T: Ord + Copy>(c_aggr: &CostVolume<T>) -> DisparityMap {
    let (w, h, dm) = (c_aggr.width(), c_aggr.height(), c_aggr.d_max());
    let d: Vec<u16> = c_aggr.rows().flat_map(|row| wta_row(row, dm)).collect();
    DisparityMap::from_disparities(w, h, &d).expect("sized from volume")
}

/// Right-view disparities approximated from the left-referenced volume.
pub fn wta_right<T: Ord + Copy>(c_aggr: &CostVolume<T>) -> DisparityMap {
    let (w, h, dm) = (c_aggr.width(), c_aggr.height(), c_aggr.d_max());
    let mut map = DisparityMap::invalid(w, h);
    for (y, row) in c_aggr.rows().enumerate() {
        for (x, d) in wta_right_row(row, dm).into_iter().enumerate() {
            if let Some(d) = d {
                map.set(x, y, f32::from(d));
            }
        }
    }
    map
}

/// Keep a left disparity only if the right view, sampled at the matched
/// column `x - d_left`, agrees within `tol`.
pub fn lr_check(d_left: &DisparityMap, d_right: &DisparityMap, tol: f32) -> Result<DisparityMap> {
    if !d_left.same_size(d_right) {
        return Err(Error::Dimension(format!(
            "left {}x{} vs right {}x{}",
            d_left.width(),
            d_left.height(),
            d_right.width(),
            d_right.height()
        )));
    }
    let mut out = d_left.clone();
    for y in 0..d_left.height() {
        for x in 0..d_left.width() {
            let Some(dl) = d_left.get(x, y) else { continue };
            let xr = x as f32 - dl.round();
            let consistent = xr >= 0.0
                && d_right
                    .get(xr as usize, y)
                    .is_some_and(|dr| (dl - dr).abs() <= tol);
            if !consistent {
                out.invalidate(x, y);
            }
        }
    }
    Ok(out)
}

/// `k × k` median over valid samples with replicated borders.
///
/// A pixel keeps a value only if it was valid and at least `⌈k²/2⌉` of its
/// window samples are valid; even sample counts take the lower median.
pub fn median_filter(d: &DisparityMap, k: usize) -> Result<DisparityMap> {
    if k.is_multiple_of(2) {
        return Err(Error::Parameter(format!("median window {k} must be odd")));
    }
    let (w, h) = (d.width() as isize, d.height() as isize);
    let r = (k / 2) as isize;
    let need = (k * k).div_ceil(2);
    let mut out = DisparityMap::invalid(d.width(), d.height());
    let mut samples = Vec::with_capacity(k * k);
    for y in 0..h {
        for x in 0..w {
            if d.get(x as usize, y as usize).is_none() {
                continue;
            }
            samples.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    if let Some(v) = d.get(xx, yy) {
                        samples.push(v);
                    }
                }
            }
            if samples.len() >= need {
                samples.sort_unstable_by(f32::total_cmp);
                out.set(x as usize, y as usize, samples[(samples.len() - 1) / 2]);
            }
        }
    }
    Ok(out)
}
