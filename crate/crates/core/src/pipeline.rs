//! The full disparity pipeline: rectify, match, aggregate, left-right check
//! and median filter.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cost::{census_transform, cost_census, cost_sad, CostVolume};
use crate::error::{Error, Result};
use crate::imgio::{DisparityMap, GrayImage};
use crate::rectify::{apply_rectification, apply_rectification_streaming, RectificationMaps};
use crate::sgm::{
    aggregate, lr_check, median_filter, wta, wta_right, wta_right_row, wta_row, PathCount, SgmParams,
    StreamingAggregator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Sad,
    Census,
}

impl CostKind {
    /// Default `(P1, P2)` for the cost's value range.
    pub fn default_penalties(self) -> (u32, u32) {
        match self {
            CostKind::Sad => (200, 800),
            CostKind::Census => (8, 32),
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Sad => "sad",
            CostKind::Census => "census",
        })
    }
}

impl FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sad" => Ok(CostKind::Sad),
            "census" | "ct" => Ok(CostKind::Census),
            _ => Err(format!("unknown cost '{s}', expected sad or census")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Whole-volume aggregation; four or eight paths.
    Reference,
    /// Line-buffered rectification and row-at-a-time aggregation.
    Streaming,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Reference => "reference",
            Engine::Streaming => "streaming",
        })
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reference" => Ok(Engine::Reference),
            "streaming" => Ok(Engine::Streaming),
            _ => Err(format!("unknown engine '{s}', expected reference or streaming")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cost: CostKind,
    pub d_max: usize,
    pub p1: u32,
    pub p2: u32,
    /// Support window radius for SAD and census (2 gives 5×5).
    pub radius: usize,
    pub paths: PathCount,
    pub engine: Engine,
    pub lr_tol: u32,
    pub median_k: usize,
    pub rect_left: Option<PathBuf>,
    pub rect_right: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn for_cost(cost: CostKind) -> Self {
        let (p1, p2) = cost.default_penalties();
        Self {
            cost,
            d_max: 60,
            p1,
            p2,
            radius: 2,
            paths: PathCount::Four,
            engine: Engine::Streaming,
            lr_tol: 1,
            median_k: 5,
            rect_left: None,
            rect_right: None,
        }
    }

    pub fn census() -> Self {
        Self::for_cost(CostKind::Census)
    }

    pub fn sad() -> Self {
        Self::for_cost(CostKind::Sad)
    }

    pub fn sgm_params(&self) -> SgmParams {
        SgmParams {
            p1: self.p1,
            p2: self.p2,
            paths: self.paths,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 || self.d_max > 256 {
            return Err(Error::Parameter(format!("dmax {} must be in 1..=256", self.d_max)));
        }
        if self.radius == 0 || (self.cost == CostKind::Census && self.radius > 2) {
            return Err(Error::Parameter(format!("radius {} unsupported for {}", self.radius, self.cost)));
        }
        if self.median_k.is_multiple_of(2) {
            return Err(Error::Parameter(format!("median_k {} must be odd", self.median_k)));
        }
        if self.engine == Engine::Streaming && self.paths == PathCount::Eight {
            return Err(Error::Unsupported("the streaming engine aggregates four paths only".into()));
        }
        if self.rect_left.is_some() != self.rect_right.is_some() {
            return Err(Error::Parameter("rectification needs both left and right maps".into()));
        }
        self.sgm_params().validate()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::census()
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        write!(
            f,
            "cost={} dmax={} p1={} p2={} radius={} paths={} engine={} lr_tol={} median_k={} rect_left={} rect_right={}",
            self.cost,
            self.d_max,
            self.p1,
            self.p2,
            self.radius,
            self.paths.count(),
            self.engine,
            self.lr_tol,
            self.median_k,
            path(&self.rect_left),
            path(&self.rect_right),
        )
    }
}

/// A configured pipeline with its rectification maps loaded.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    maps: Option<(RectificationMaps, RectificationMaps)>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let maps = match (&cfg.rect_left, &cfg.rect_right) {
            (Some(l), Some(r)) => Some((RectificationMaps::load(l)?, RectificationMaps::load(r)?)),
            _ => None,
        };
        Ok(Self { cfg, maps })
    }

    pub fn with_maps(cfg: PipelineConfig, left: RectificationMaps, right: RectificationMaps) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            maps: Some((left, right)),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    fn rectify(&self, img: &GrayImage, maps: &RectificationMaps) -> Result<GrayImage> {
        match self.cfg.engine {
            Engine::Reference => apply_rectification(img, maps),
            Engine::Streaming => {
                if !(img.width() == maps.width() && img.height() == maps.height()) {
                    return Err(Error::Dimension(format!(
                        "image {}x{} vs maps {}x{}",
                        img.width(),
                        img.height(),
                        maps.width(),
                        maps.height()
                    )));
                }
                apply_rectification_streaming(img.rows(), maps, maps.max_vertical_shift())
            }
        }
    }

    pub fn cost_volume(&self, left: &GrayImage, right: &GrayImage) -> Result<CostVolume> {
        match self.cfg.cost {
            CostKind::Sad => cost_sad(left, right, self.cfg.d_max, self.cfg.radius),
            CostKind::Census => {
                let l = census_transform(left, self.cfg.radius)?;
                let r = census_transform(right, self.cfg.radius)?;
                cost_census(&l, &r, self.cfg.d_max)
            }
        }
    }

    /// Left and right winner-takes-all maps before consistency filtering.
    pub fn raw_disparities(&self, left: &GrayImage, right: &GrayImage) -> Result<(DisparityMap, DisparityMap)> {
        if !left.same_size(right) {
            return Err(Error::Dimension(format!(
                "left {}x{} vs right {}x{}",
                left.width(),
                left.height(),
                right.width(),
                right.height()
            )));
        }
        let (left, right) = match &self.maps {
            Some((ml, mr)) => (self.rectify(left, ml)?, self.rectify(right, mr)?),
            None => (left.clone(), right.clone()),
        };
        let c = self.cost_volume(&left, &right)?;
        let params = self.cfg.sgm_params();
        match self.cfg.engine {
            Engine::Reference => {
                let agg = aggregate(&c, &params)?;
                Ok((wta(&agg), wta_right(&agg)))
            }
            Engine::Streaming => {
                let (w, h, dm) = (c.width(), c.height(), c.d_max());
                let mut stream = StreamingAggregator::new(w, dm, &params)?;
                let mut row = vec![0u32; w * dm];
                let mut dl = Vec::with_capacity(w * h);
                let mut dr = DisparityMap::invalid(w, h);
                for (y, costs) in c.rows().enumerate() {
                    stream.push_row_into(costs, &mut row)?;
                    dl.extend(wta_row(&row, dm));
                    for (x, d) in wta_right_row(&row, dm).into_iter().enumerate() {
                        if let Some(d) = d {
                            dr.set(x, y, f32::from(d));
                        }
                    }
                }
                Ok((DisparityMap::from_disparities(w, h, &dl)?, dr))
            }
        }
    }

    pub fn compute(&self, left: &GrayImage, right: &GrayImage) -> Result<DisparityMap> {
        let (dl, dr) = self.raw_disparities(left, right)?;
        let checked = lr_check(&dl, &dr, self.cfg.lr_tol as f32)?;
        median_filter(&checked, self.cfg.median_k)
    }
}

/// One-shot convenience around [`Pipeline`].
pub fn compute_disparity(left: &GrayImage, right: &GrayImage, cfg: &PipelineConfig) -> Result<DisparityMap> {
    Pipeline::new(cfg.clone())?.compute(left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64, w: usize, h: usize) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random()).unwrap()
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.cost, c.d_max, c.p1, c.p2, c.radius, c.median_k), (CostKind::Census, 60, 8, 32, 2, 5));
        let s = PipelineConfig::sad();
        assert_eq!((s.p1, s.p2), (200, 800));
    }

    #[test]
    fn identical_images_give_zero_disparity() {
        let img = textured(1, 48, 32);
        let mut cfg = PipelineConfig::census();
        cfg.d_max = 16;
        let d = compute_disparity(&img, &img, &cfg).unwrap();
        for y in 4..28 {
            for x in 4..44 {
                if let Some(v) = d.get(x, y) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(d.valid_count() > 40 * 24);
    }

    #[test]
    fn engines_agree() {
        let left = textured(2, 40, 24);
        let right = GrayImage::from_fn(40, 24, |x, y| left.get((x + 3).min(39), y)).unwrap();
        for cost in [CostKind::Census, CostKind::Sad] {
            let mut cfg = PipelineConfig::for_cost(cost);
            cfg.d_max = 12;
            cfg.engine = Engine::Reference;
            let a = compute_disparity(&left, &right, &cfg).unwrap();
            cfg.engine = Engine::Streaming;
            let b = compute_disparity(&left, &right, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rectification_is_applied() {
        let left = textured(4, 30, 20);
        let right = textured(5, 30, 20);
        let mut cfg = PipelineConfig::census();
        cfg.d_max = 8;
        let id = RectificationMaps::identity(30, 20);
        let plain = compute_disparity(&left, &right, &cfg).unwrap();
        for engine in [Engine::Reference, Engine::Streaming] {
            cfg.engine = engine;
            let p = Pipeline::with_maps(cfg.clone(), id.clone(), id.clone()).unwrap();
            assert_eq!(p.compute(&left, &right).unwrap(), plain);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = PipelineConfig::census();
        cfg.d_max = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::census();
        cfg.paths = PathCount::Eight;
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
        cfg.engine = Engine::Reference;
        assert!(cfg.validate().is_ok());
        cfg.p1 = 40;
        assert!(cfg.validate().is_err());
    }
}
