use crate::cost::{AggregatedVolume, CostVolume};
use crate::error::Result;

use super::SgmParams;

/// Whole-image path aggregation: `C_aggr = Σ_r L_r`.
pub fn aggregate(c: &CostVolume, params: &SgmParams) -> Result<AggregatedVolume> {
    params.validate()?;
    let (w, h, dm) = (c.width(), c.height(), c.d_max());
    let mut sum = vec![0u32; w * h * dm];
    let mut path = vec![0u32; w * h * dm];
    for &(dx, dy) in params.paths.directions() {
        path_costs(c, dx, dy, params.p1, params.p2, &mut path);
        for (s, l) in sum.iter_mut().zip(&path) {
            *s += *l;
        }
    }
    CostVolume::new(w, h, dm, sum)
}

/// Fill `out` with `L_r` for the direction `r = (dx, dy)`.
fn path_costs(c: &CostVolume, dx: isize, dy: isize, p1: u32, p2: u32, out: &mut [u32]) {
    let (w, h, dm) = (c.width() as isize, c.height() as isize, c.d_max());
    // Visit pixels so that p - r is always finished before p.
    let ys: Vec<isize> = if dy < 0 { (0..h).rev().collect() } else { (0..h).collect() };
    let xs: Vec<isize> = if dx < 0 { (0..w).rev().collect() } else { (0..w).collect() };
    for &y in &ys {
        for &x in &xs {
            let (px, py) = (x - dx, y - dy);
            let here = ((y * w + x) as usize) * dm;
            let cost = c.pixel(x as usize, y as usize);
            if px < 0 || px >= w || py < 0 || py >= h {
                for d in 0..dm {
                    out[here + d] = u32::from(cost[d]);
                }
                continue;
            }
            let prev_at = ((py * w + px) as usize) * dm;
            let min_prev = (0..dm).map(|d| out[prev_at + d]).min().unwrap();
            for d in 0..dm {
                let mut best = out[prev_at + d];
                if d > 0 {
                    best = best.min(out[prev_at + d - 1] + p1);
                }
                if d + 1 < dm {
                    best = best.min(out[prev_at + d + 1] + p1);
                }
                best = best.min(min_prev + p2);
                out[here + d] = u32::from(cost[d]) + best - min_prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgm::PathCount;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(rng: &mut ChaCha8Rng, w: usize, h: usize, dm: usize, max: u16) -> CostVolume {
        let costs = (0..w * h * dm).map(|_| rng.random_range(0..=max)).collect();
        CostVolume::new(w, h, dm, costs).unwrap()
    }

    /// Plain 1-D scanline dynamic program.
    fn scanline_dp(costs: &[Vec<u32>], p1: u32, p2: u32) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        for (i, c) in costs.iter().enumerate() {
            if i == 0 {
                out.push(c.clone());
                continue;
            }
            let prev = &out[i - 1];
            let m = *prev.iter().min().unwrap();
            let row = (0..c.len())
                .map(|d| {
                    let mut cands = vec![prev[d], m + p2];
                    if d > 0 {
                        cands.push(prev[d - 1] + p1);
                    }
                    if d + 1 < c.len() {
                        cands.push(prev[d + 1] + p1);
                    }
                    c[d] + cands.into_iter().min().unwrap() - m
                })
                .collect();
            out.push(row);
        }
        out
    }

    #[test]
    fn zero_penalties_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_volume(&mut rng, 9, 7, 5, 24);
        for (paths, k) in [(PathCount::Four, 4), (PathCount::Eight, 8)] {
            let agg = aggregate(&c, &SgmParams::new(0, 0, paths).unwrap()).unwrap();
            for (a, b) in agg.costs().iter().zip(c.costs()) {
                assert_eq!(*a, k * u32::from(*b));
            }
        }
    }

    #[test]
    fn single_row_matches_scanline_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (w, dm) = (23, 6);
        let c = random_volume(&mut rng, w, 1, dm, 30);
        let (p1, p2) = (3, 11);
        let agg = aggregate(&c, &SgmParams::new(p1, p2, PathCount::Four).unwrap()).unwrap();
        let scan: Vec<Vec<u32>> = (0..w)
            .map(|x| c.pixel(x, 0).iter().map(|&v| u32::from(v)).collect())
            .collect();
        let l0 = scanline_dp(&scan, p1, p2);
        for x in 0..w {
            for d in 0..dm {
                assert_eq!(agg.get(x, 0, d), l0[x][d] + 3 * u32::from(c.get(x, 0, d)));
            }
        }
    }

    #[test]
    fn single_column_vertical_path_matches_scanline_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (h, dm) = (17, 5);
        let c = random_volume(&mut rng, 1, h, dm, 30);
        let (p1, p2) = (2, 9);
        let agg = aggregate(&c, &SgmParams::new(p1, p2, PathCount::Four).unwrap()).unwrap();
        let scan: Vec<Vec<u32>> = (0..h)
            .map(|y| c.pixel(0, y).iter().map(|&v| u32::from(v)).collect())
            .collect();
        let l90 = scanline_dp(&scan, p1, p2);
        for y in 0..h {
            for d in 0..dm {
                assert_eq!(agg.get(0, y, d), l90[y][d] + 3 * u32::from(c.get(0, y, d)));
            }
        }
    }

    #[test]
    fn path_costs_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = random_volume(&mut rng, 30, 20, 16, u16::MAX);
        let p2 = 5000;
        let agg = aggregate(&c, &SgmParams::new(100, p2, PathCount::Eight).unwrap()).unwrap();
        let bound = 8 * (u32::from(u16::MAX) + p2);
        assert!(agg.costs().iter().all(|&v| v <= bound));
    }

    #[test]
    fn rejects_p1_above_p2() {
        assert!(SgmParams::new(5, 4, PathCount::Four).is_err());
    }
}
