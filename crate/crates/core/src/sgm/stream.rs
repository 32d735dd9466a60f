use crate::error::{Error, Result};

use super::{PathCount, SgmParams};

/// Row-at-a-time four-path aggregation.
///
/// State is one buffer of the previous row holding the 45°, 90° and 135°
/// path costs (`3 × d_max` per pixel), a `d_max` carry for the horizontal
/// path, and a `d_max` carry for the 45° predecessor that the current row
/// has already overwritten.
#[derive(Debug, Clone)]
pub struct StreamingAggregator {
    width: usize,
    d_max: usize,
    p1: u32,
    p2: u32,
    prev_row: Vec<u32>,
    have_prev: bool,
    horizontal: Vec<u32>,
    diagonal: Vec<u32>,
    scratch: Vec<u32>,
}

const L45: usize = 0;
const L90: usize = 1;
const L135: usize = 2;

impl StreamingAggregator {
    pub fn new(width: usize, d_max: usize, params: &SgmParams) -> Result<Self> {
        params.validate()?;
        if params.paths != PathCount::Four {
            return Err(Error::Unsupported(
                "streaming aggregation is single-pass and supports four paths only".into(),
            ));
        }
        if width == 0 || d_max == 0 {
            return Err(Error::Range(format!("empty row {width}x{d_max}")));
        }
        Ok(Self {
            width,
            d_max,
            p1: params.p1,
            p2: params.p2,
            prev_row: vec![0; width * 3 * d_max],
            have_prev: false,
            horizontal: vec![0; d_max],
            diagonal: vec![0; d_max],
            scratch: vec![0; d_max],
        })
    }

    /// Number of `u32` cells held between rows.
    pub fn buffered_values(&self) -> usize {
        self.prev_row.len() + self.horizontal.len() + self.diagonal.len()
    }

    /// Aggregate one row of unary costs (`width * d_max`, disparity
    /// innermost) into `out`.
    pub fn push_row_into(&mut self, costs: &[u16], out: &mut [u32]) -> Result<()> {
        let (w, dm) = (self.width, self.d_max);
        if costs.len() != w * dm || out.len() != w * dm {
            return Err(Error::Dimension(format!(
                "row slices of {} / {} values, expected {}",
                costs.len(),
                out.len(),
                w * dm
            )));
        }
        for x in 0..w {
            let c = &costs[x * dm..(x + 1) * dm];
            let agg = &mut out[x * dm..(x + 1) * dm];

            // 0°: predecessor is (x-1, y), held in the horizontal carry.
            if x == 0 {
                widen(c, &mut self.horizontal);
            } else {
                step(c, &self.horizontal, self.p1, self.p2, &mut self.scratch);
                self.horizontal.copy_from_slice(&self.scratch);
            }
            agg.copy_from_slice(&self.horizontal);

            let cell = x * 3 * dm;
            if self.have_prev {
                // 45°: predecessor (x-1, y-1) was saved before being overwritten.
                let l45_old = &self.prev_row[cell + L45 * dm..cell + (L45 + 1) * dm];
                if x == 0 {
                    widen(c, &mut self.scratch);
                } else {
                    step(c, &self.diagonal, self.p1, self.p2, &mut self.scratch);
                }
                self.diagonal.copy_from_slice(l45_old);
                self.prev_row[cell + L45 * dm..cell + (L45 + 1) * dm].copy_from_slice(&self.scratch);
                add(agg, &self.scratch);

                // 90°: predecessor (x, y-1).
                step(
                    c,
                    &self.prev_row[cell + L90 * dm..cell + (L90 + 1) * dm],
                    self.p1,
                    self.p2,
                    &mut self.scratch,
                );
                self.prev_row[cell + L90 * dm..cell + (L90 + 1) * dm].copy_from_slice(&self.scratch);
                add(agg, &self.scratch);

                // 135°: predecessor (x+1, y-1) is still the previous row.
                if x + 1 == w {
                    widen(c, &mut self.scratch);
                } else {
                    let next = (x + 1) * 3 * dm;
                    step(
                        c,
                        &self.prev_row[next + L135 * dm..next + (L135 + 1) * dm],
                        self.p1,
                        self.p2,
                        &mut self.scratch,
                    );
                }
                self.prev_row[cell + L135 * dm..cell + (L135 + 1) * dm].copy_from_slice(&self.scratch);
                add(agg, &self.scratch);
            } else {
                for k in [L45, L90, L135] {
                    widen(c, &mut self.prev_row[cell + k * dm..cell + (k + 1) * dm]);
                }
                for (a, &v) in agg.iter_mut().zip(c) {
                    *a += 3 * u32::from(v);
                }
            }
        }
        self.have_prev = true;
        Ok(())
    }

    pub fn push_row(&mut self, costs: &[u16]) -> Result<Vec<u32>> {
        let mut out = vec![0; self.width * self.d_max];
        self.push_row_into(costs, &mut out)?;
        Ok(out)
    }
}

#[inline]
fn widen(c: &[u16], out: &mut [u32]) {
    for (o, &v) in out.iter_mut().zip(c) {
        *o = u32::from(v);
    }
}

#[inline]
fn add(acc: &mut [u32], v: &[u32]) {
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[inline]
fn step(c: &[u16], prev: &[u32], p1: u32, p2: u32, out: &mut [u32]) {
    let dm = c.len();
    let min_prev = prev.iter().copied().min().unwrap_or(0);
    let jump = min_prev + p2;
    for d in 0..dm {
        let lower = if d > 0 { prev[d - 1] + p1 } else { u32::MAX };
        let upper = if d + 1 < dm { prev[d + 1] + p1 } else { u32::MAX };
        let best = prev[d].min(lower).min(upper).min(jump);
        out[d] = u32::from(c[d]) + best - min_prev;
    }
}

/// Aggregate a stream of cost rows; yields one aggregated row per input row.
pub fn aggregate_streaming<'a, I>(
    rows: I,
    width: usize,
    d_max: usize,
    params: &SgmParams,
) -> Result<impl Iterator<Item = Result<Vec<u32>>> + 'a>
where
    I: IntoIterator<Item = &'a [u16]>,
    I::IntoIter: 'a,
{
    let mut agg = StreamingAggregator::new(width, d_max, params)?;
    Ok(rows.into_iter().map(move |row| agg.push_row(row)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostVolume;
    use crate::sgm::aggregate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stream_all(c: &CostVolume, params: &SgmParams) -> Vec<u32> {
        aggregate_streaming(c.rows(), c.width(), c.d_max(), params)
            .unwrap()
            .flat_map(Result::unwrap)
            .collect()
    }

    #[test]
    fn constant_volume_zero_penalty() {
        let c = CostVolume::filled(6, 5, 4, 7u16).unwrap();
        let params = SgmParams::new(0, 0, PathCount::Four).unwrap();
        assert!(stream_all(&c, &params).iter().all(|&v| v == 28));
    }

    #[test]
    fn random_volumes_match_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let (w, h, dm) = (rng.random_range(1..=32), rng.random_range(1..=32), rng.random_range(1..=16));
            let costs = (0..w * h * dm).map(|_| rng.random_range(0..200u16)).collect();
            let c = CostVolume::new(w, h, dm, costs).unwrap();
            let p1 = rng.random_range(0..20);
            let params = SgmParams::new(p1, p1 + rng.random_range(0..40), PathCount::Four).unwrap();
            let reference = aggregate(&c, &params).unwrap();
            assert_eq!(stream_all(&c, &params), reference.costs());
        }
    }

    #[test]
    fn twenty_by_fourteen_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let costs = (0..20 * 14 * 8).map(|_| rng.random_range(0..25u16)).collect();
        let c = CostVolume::new(20, 14, 8, costs).unwrap();
        let params = SgmParams::new(1, 3, PathCount::Four).unwrap();
        assert_eq!(stream_all(&c, &params), aggregate(&c, &params).unwrap().costs());
    }

    #[test]
    fn eight_paths_unsupported() {
        let params = SgmParams::new(1, 2, PathCount::Eight).unwrap();
        assert!(matches!(
            StreamingAggregator::new(4, 4, &params),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn buffer_footprint() {
        let params = SgmParams::new(1, 2, PathCount::Four).unwrap();
        let agg = StreamingAggregator::new(10, 6, &params).unwrap();
        assert_eq!(agg.buffered_values(), 10 * 3 * 6 + 2 * 6);
    }
}
