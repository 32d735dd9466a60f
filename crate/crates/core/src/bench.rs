//! Scoring against KITTI Stereo 2015 ground truth.
//!
//! A pixel counts as correct when its disparity is within 3 px of the
//! ground truth. Density is the fraction of ground-truth pixels for which
//! the estimate is valid. Both are computed on a 640×360 crop whose
//! top-left corner is configurable.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgio::{crop_roi, load_gray, load_kitti_disparity, DisparityMap};
use crate::pipeline::{CostKind, Pipeline, PipelineConfig};

pub const CORRECT_THRESHOLD_PX: f32 = 3.0;
pub const ROI_WIDTH: usize = 640;
pub const ROI_HEIGHT: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub frame_id: String,
    /// Estimate-valid over ground-truth-valid pixels.
    pub density: f64,
    /// Correct over pixels valid in both; 0 when there are none.
    pub correct: f64,
    /// Pixels valid in both maps.
    pub evaluated_pixels: usize,
    pub gt_pixels: usize,
}

/// Compare an estimate with ground truth of the same size.
pub fn evaluate(est: &DisparityMap, gt: &DisparityMap) -> Result<EvalResult> {
    if !est.same_size(gt) {
        return Err(Error::Range(format!(
            "estimate {}x{} vs ground truth {}x{}",
            est.width(),
            est.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut gt_pixels = 0usize;
    let mut both = 0usize;
    let mut good = 0usize;
    for ((&ev, &eok), (&gv, &gok)) in est
        .values()
        .iter()
        .zip(est.valid_mask())
        .zip(gt.values().iter().zip(gt.valid_mask()))
    {
        if !gok {
            continue;
        }
        gt_pixels += 1;
        if eok {
            both += 1;
            if (ev - gv).abs() < CORRECT_THRESHOLD_PX {
                good += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(EvalResult {
        frame_id: String::new(),
        density: ratio(both, gt_pixels),
        correct: ratio(good, both),
        evaluated_pixels: both,
        gt_pixels,
    })
}

/// Which training frames to score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameSelection {
    All,
    /// The first `n` frames in id order.
    First(usize),
    Ids(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KittiConfig {
    pub pipeline: PipelineConfig,
    pub frames: FrameSelection,
    /// Top-left corner of the evaluation crop.
    pub roi_origin: (usize, usize),
}

impl KittiConfig {
    pub fn new(pipeline: PipelineConfig) -> Self {
        Self {
            pipeline,
            frames: FrameSelection::All,
            roi_origin: (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KittiReport {
    pub cost: CostKind,
    pub frames: Vec<EvalResult>,
    /// Frames that could not be scored, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl KittiReport {
    /// Mean per-frame density.
    pub fn mean_density(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.density))
    }

    /// Mean per-frame correctness over frames with evaluated pixels.
    pub fn mean_correct(&self) -> f64 {
        mean(self.frames.iter().filter(|f| f.evaluated_pixels > 0).map(|f| f.correct))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = it.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Frame ids (`000000_10` style stems) present in `disp_noc_0`, sorted.
pub fn list_frames(dir: &Path) -> Result<Vec<String>> {
    let gt_dir = dir.join("disp_noc_0");
    let entries = fs::read_dir(&gt_dir).map_err(|e| Error::io(&gt_dir, e))?;
    let mut ids = Vec::new();
    for e in entries {
        let e = e.map_err(|err| Error::io(&gt_dir, err))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".png") {
            ids.push(stem.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn frame_paths(dir: &Path, id: &str) -> [PathBuf; 3] {
    let file = format!("{id}.png");
    [
        dir.join("image_2").join(&file),
        dir.join("image_3").join(&file),
        dir.join("disp_noc_0").join(file),
    ]
}

fn score_frame(pipeline: &Pipeline, dir: &Path, id: &str, origin: (usize, usize)) -> Result<EvalResult> {
    let [l, r, g] = frame_paths(dir, id);
    let (x0, y0) = origin;
    let left = crop_roi(&load_gray(&l)?, x0, y0, ROI_WIDTH, ROI_HEIGHT)?;
    let right = crop_roi(&load_gray(&r)?, x0, y0, ROI_WIDTH, ROI_HEIGHT)?;
    let gt = load_kitti_disparity(&g)?.crop(x0, y0, ROI_WIDTH, ROI_HEIGHT)?;
    let est = pipeline.compute(&left, &right)?;
    let mut res = evaluate(&est, &gt)?;
    res.frame_id = id.to_string();
    Ok(res)
}

/// Score the selected frames of a KITTI 2015 training directory
/// (`image_2`, `image_3`, `disp_noc_0`). Frames run in parallel; results
/// keep id order. Unreadable frames are skipped with a warning.
pub fn run_kitti(dir: impl AsRef<Path>, cfg: &KittiConfig) -> Result<KittiReport> {
    let dir = dir.as_ref();
    let pipeline = Pipeline::new(cfg.pipeline.clone())?;
    let ids = match &cfg.frames {
        FrameSelection::All => list_frames(dir)?,
        FrameSelection::First(n) => list_frames(dir)?.into_iter().take(*n).collect(),
        FrameSelection::Ids(ids) => ids.clone(),
    };
    let results: Vec<(String, Result<EvalResult>)> = ids
        .par_iter()
        .map(|id| (id.clone(), score_frame(&pipeline, dir, id, cfg.roi_origin)))
        .collect();
    let mut report = KittiReport {
        cost: cfg.pipeline.cost,
        frames: Vec::new(),
        skipped: Vec::new(),
    };
    for (id, r) in results {
        match r {
            Ok(res) => report.frames.push(res),
            Err(e) => {
                warn!("skipping frame {id}: {e}");
                report.skipped.push((id, e.to_string()));
            }
        }
    }
    Ok(report)
}

/// Aligned-column text: per-frame rows for each report, then a summary
/// with one row per cost function.
pub fn format_text(reports: &[KittiReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "# cost={}", r.cost);
        let _ = writeln!(s, "{:<12} {:>9} {:>9} {:>10}", "frame", "density", "correct", "evaluated");
        for f in &r.frames {
            let _ = writeln!(
                s,
                "{:<12} {:>8.2}% {:>8.2}% {:>10}",
                f.frame_id,
                100.0 * f.density,
                100.0 * f.correct,
                f.evaluated_pixels
            );
        }
        for (id, why) in &r.skipped {
            let _ = writeln!(s, "{id:<12} skipped: {why}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "# summary");
    let _ = writeln!(s, "{:<8} {:>7} {:>9} {:>9}", "cost", "frames", "density", "correct");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<8} {:>7} {:>8.2}% {:>8.2}%",
            r.cost.to_string(),
            r.frames.len(),
            100.0 * r.mean_density(),
            100.0 * r.mean_correct()
        );
    }
    s
}

/// One CSV row per frame plus a `mean` row per report.
pub fn format_csv(reports: &[KittiReport]) -> String {
    let mut s = String::from("cost,frame,density,correct,evaluated_pixels,gt_pixels\n");
    for r in reports {
        for f in &r.frames {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{},{}",
                r.cost, f.frame_id, f.density, f.correct, f.evaluated_pixels, f.gt_pixels
            );
        }
        let _ = writeln!(s, "{},mean,{:.6},{:.6},,", r.cost, r.mean_density(), r.mean_correct());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(vals: &[Option<f32>], w: usize) -> DisparityMap {
        let values = vals.iter().map(|v| v.unwrap_or(0.0)).collect();
        let valid = vals.iter().map(|v| v.is_some()).collect();
        DisparityMap::from_parts(w, vals.len() / w, values, valid).unwrap()
    }

    #[test]
    fn identical_maps() {
        let gt = map(&[Some(3.0), None, Some(10.5), Some(7.0)], 2);
        let r = evaluate(&gt, &gt).unwrap();
        assert_eq!((r.density, r.correct, r.evaluated_pixels), (1.0, 1.0, 3));
    }

    #[test]
    fn empty_estimate() {
        let gt = map(&[Some(3.0), Some(4.0)], 2);
        let est = DisparityMap::invalid(2, 1);
        let r = evaluate(&est, &gt).unwrap();
        assert_eq!((r.density, r.correct, r.evaluated_pixels), (0.0, 0.0, 0));
    }

    #[test]
    fn three_pixel_rule() {
        let gt = map(&[Some(10.0), Some(10.0), Some(10.0), Some(10.0)], 4);
        let est = map(&[Some(14.0), Some(6.0), Some(12.9), Some(13.0)], 4);
        let r = evaluate(&est, &gt).unwrap();
        assert_eq!(r.correct, 0.25);
        let shifted = map(&[Some(14.0); 4], 4);
        assert_eq!(evaluate(&shifted, &gt).unwrap().correct, 0.0);
    }

    #[test]
    fn gt_invalid_pixels_do_not_count() {
        let gt = map(&[Some(5.0), None], 2);
        let a = evaluate(&map(&[Some(5.0), None], 2), &gt).unwrap();
        let b = evaluate(&map(&[Some(5.0), Some(40.0)], 2), &gt).unwrap();
        assert_eq!((a.density, a.correct), (b.density, b.correct));
    }

    #[test]
    fn size_mismatch_is_range_error() {
        let e = evaluate(&DisparityMap::invalid(2, 2), &DisparityMap::invalid(3, 2)).unwrap_err();
        assert!(matches!(e, Error::Range(_)));
    }

    #[test]
    fn missing_dataset_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = KittiConfig::new(PipelineConfig::default());
        assert!(matches!(run_kitti(dir.path(), &cfg), Err(Error::Io { .. })));
    }

    #[test]
    fn report_formats() {
        let r = KittiReport {
            cost: CostKind::Census,
            frames: vec![
                EvalResult {
                    frame_id: "000000_10".into(),
                    density: 0.5,
                    correct: 0.9,
                    evaluated_pixels: 10,
                    gt_pixels: 20,
                },
                EvalResult {
                    frame_id: "000001_10".into(),
                    density: 0.7,
                    correct: 0.0,
                    evaluated_pixels: 0,
                    gt_pixels: 0,
                },
            ],
            skipped: vec![("000002_10".into(), "missing".into())],
        };
        assert!((r.mean_density() - 0.6).abs() < 1e-12);
        assert_eq!(r.mean_correct(), 0.9);
        let text = format_text(std::slice::from_ref(&r));
        assert!(text.contains("000002_10    skipped: missing"));
        assert!(text.contains("census         2    60.00%    90.00%"));
        let csv = format_csv(&[r]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("census,mean,0.600000,0.900000,,"));
    }
}
