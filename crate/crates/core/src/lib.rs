//! Embedded-style stereo pipeline and reactive obstacle avoidance.
//!
//! The disparity path is rectification by integer lookup maps, SAD or census
//! matching costs, four-path semi-global aggregation, a left-right
//! consistency check and a median filter. Disparity maps feed U-/V-disparity
//! histograms, from which obstacles are extracted as cylinders and an escape
//! direction is chosen. A small deterministic simulator closes the loop, and
//! [`bench`] scores disparity maps against KITTI Stereo 2015 ground truth.

pub mod avoid;
pub mod bench;
pub mod contour;
pub mod cost;
pub mod error;
pub mod imgio;
pub mod pipeline;
pub mod rectify;
pub mod sgm;
pub mod sim;
pub mod uvmap;

pub use error::{Error, Result};
pub use imgio::{DisparityMap, GrayImage};
pub use pipeline::{compute_disparity, CostKind, Engine, Pipeline, PipelineConfig};
pub use rectify::StereoCalibration;
