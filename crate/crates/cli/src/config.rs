use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use stereo_avoid::sgm::PathCount;
use stereo_avoid::{CostKind, Engine, PipelineConfig};

use crate::CliError;

/// Pipeline options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Matching cost: sad or census.
    #[arg(long)]
    pub cost: Option<String>,
    /// Number of disparities searched, 0..dmax.
    #[arg(long)]
    pub dmax: Option<String>,
    /// Penalty for a one-pixel disparity change.
    #[arg(long)]
    pub p1: Option<String>,
    /// Penalty for larger disparity jumps.
    #[arg(long)]
    pub p2: Option<String>,
    /// Support window radius (2 gives 5x5).
    #[arg(long)]
    pub radius: Option<String>,
    /// Aggregation paths: 4 or 8 (8 needs the reference engine).
    #[arg(long)]
    pub paths: Option<String>,
    /// reference or streaming.
    #[arg(long)]
    pub engine: Option<String>,
    /// Left-right check tolerance in pixels.
    #[arg(long)]
    pub lr_tol: Option<String>,
    /// Median filter size (odd), 1 disables it.
    #[arg(long)]
    pub median_k: Option<String>,
    /// Rectification maps (.rmap) for the left camera.
    #[arg(long, value_name = "PATH")]
    pub rect_left: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub rect_right: Option<String>,
    /// Ignore rectification maps, including any in the config file.
    #[arg(long, conflicts_with_all = ["rect_left", "rect_right"])]
    pub no_rectify: bool,
}

const KEYS: [&str; 11] = [
    "cost",
    "dmax",
    "p1",
    "p2",
    "radius",
    "paths",
    "engine",
    "lr_tol",
    "median_k",
    "rect_left",
    "rect_right",
];

impl ConfigArgs {
    fn overrides(&self) -> BTreeMap<&'static str, String> {
        let flags = [
            &self.cost,
            &self.dmax,
            &self.p1,
            &self.p2,
            &self.radius,
            &self.paths,
            &self.engine,
            &self.lr_tol,
            &self.median_k,
            &self.rect_left,
            &self.rect_right,
        ];
        KEYS.iter()
            .zip(flags)
            .filter_map(|(k, v)| v.clone().map(|v| (*k, v)))
            .collect()
    }
}

/// Parse `key = value` lines; `#` starts a comment. Keys may use `-` or
/// `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<&'static str, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", i + 1)));
        };
        let key = k.trim().replace('-', "_");
        let Some(&known) = KEYS.iter().find(|&&name| name == key || (name == "dmax" && key == "d_max")) else {
            return Err(CliError::Usage(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
        };
        if out.insert(known, v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key '{known}'", i + 1)));
        }
    }
    Ok(out)
}

fn read_config_file(path: &Path) -> Result<BTreeMap<&'static str, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("{key}: invalid value '{v}'")))
}

/// Resolve the pipeline configuration: flags override the config file,
/// which overrides the defaults. Choosing a cost also selects its default
/// penalties unless `p1`/`p2` are given.
pub fn parse_config(args: &ConfigArgs) -> Result<PipelineConfig, CliError> {
    resolve(args, None)
}

/// Like [`parse_config`], with the cost forced to `cost`.
pub fn parse_config_for(args: &ConfigArgs, cost: CostKind) -> Result<PipelineConfig, CliError> {
    resolve(args, Some(cost))
}

fn resolve(args: &ConfigArgs, force_cost: Option<CostKind>) -> Result<PipelineConfig, CliError> {
    let mut values = match &args.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    values.extend(args.overrides());

    let cost = match (force_cost, values.get("cost")) {
        (Some(c), _) => c,
        (None, Some(v)) => v.parse::<CostKind>().map_err(|e| CliError::Usage(format!("cost: {e}")))?,
        (None, None) => CostKind::Census,
    };
    let mut cfg = PipelineConfig::for_cost(cost);
    for (&key, v) in &values {
        match key {
            "cost" => {}
            "dmax" => {
                cfg.d_max = number(key, v)?;
                if cfg.d_max == 0 || cfg.d_max > 256 {
                    return Err(CliError::Usage(format!("dmax: {v} is outside 1..=256")));
                }
            }
            "p1" => cfg.p1 = number(key, v)?,
            "p2" => cfg.p2 = number(key, v)?,
            "radius" => cfg.radius = number(key, v)?,
            "paths" => {
                cfg.paths = match v.as_str() {
                    "4" => PathCount::Four,
                    "8" => PathCount::Eight,
                    _ => return Err(CliError::Usage(format!("paths: {v} must be 4 or 8"))),
                }
            }
            "engine" => cfg.engine = v.parse::<Engine>().map_err(|e| CliError::Usage(format!("engine: {e}")))?,
            "lr_tol" => cfg.lr_tol = number(key, v)?,
            "median_k" => cfg.median_k = number(key, v)?,
            "rect_left" => cfg.rect_left = Some(PathBuf::from(v)),
            "rect_right" => cfg.rect_right = Some(PathBuf::from(v)),
            _ => unreachable!("keys are checked on input"),
        }
    }
    if args.no_rectify {
        cfg.rect_left = None;
        cfg.rect_right = None;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}
