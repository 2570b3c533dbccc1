//! Pipeline configuration.
//!
//! A TOML file supplies everything; command-line flags override individual
//! fields. Relative paths resolve against the directory of the config file.
//!
//! ```toml
//! dataset_root = "data"
//! output_dir = "out"
//! split = "test"            # optional, needs data/splits.txt
//!
//! [camera]                  # fov form; fx/fy/cx/cy may be given instead
//! width = 1280
//! height = 720
//! hfov_deg = 69.4
//! vfov_deg = 42.5
//!
//! [range]
//! min_m = 0.15
//! max_m = 2.0
//!
//! [alignment]
//! mode = "reference"        # or "fixed"
//! fixed_distance_m = 0.61
//! sample_stride = 4
//!
//! [[pose_models]]
//! name = "yolo11n"
//! backend = "file"          # or "onnx"
//! prediction_dir = "pred/yolo11n"
//!
//! [[depth_models]]
//! method = "depth-anything-v2"
//! backend = "onnx"
//! model_path = "models/dav2.onnx"
//! input_size = 518
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fruitlet_core::metrics::OksConfig;
use fruitlet_core::{intrinsics_from_fov, CameraIntrinsics, DepthConvention, DepthMethod, RangeFilter};
use serde::Deserialize;

use crate::formats::split::Split;
use crate::inference::{BackendConfig, BackendKind};
use crate::{Error, Result};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "FRUITLET_METRIC_THREADS";

/// How relative depth becomes metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlignMode {
    /// Least-squares fit against the sensor depth of the same image.
    Reference,
    /// Scale-only fit placing the median at a known distance, meters.
    Fixed(f64),
}

impl FromStr for AlignMode {
    type Err = Error;

    /// `reference`, `fixed` (0.61 m) or `fixed:<meters>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "reference" => Ok(Self::Reference),
            None if s == "fixed" => Ok(Self::Fixed(DEFAULT_FIXED_DISTANCE_M)),
            Some(("fixed", m)) => {
                let d: f64 = m.parse().map_err(|_| Error::Config(format!("bad fixed distance `{m}`")))?;
                if !(d > 0.0 && d <= fruitlet_core::align::MAX_DEPTH_M) {
                    return Err(Error::Config(format!("fixed distance {d} m outside (0, 10]")));
                }
                Ok(Self::Fixed(d))
            }
            _ => Err(Error::Config(format!("alignment `{s}`: expected `reference` or `fixed:<meters>`"))),
        }
    }
}

const DEFAULT_FIXED_DISTANCE_M: f64 = 0.61;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseModel {
    pub name: String,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthModel {
    pub method: DepthMethod,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub oks: OksConfig,
    /// Operating point for the precision and recall columns.
    pub pr_confidence: f64,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    pub split: Option<Split>,
    pub threads: Option<usize>,
    pub camera: CameraIntrinsics,
    pub range: RangeFilter,
    pub align: AlignMode,
    pub sample_stride: u32,
    pub pose_models: Vec<PoseModel>,
    pub depth_models: Vec<DepthModel>,
    /// Pose model whose detections are measured; `None` measures the labels.
    pub measure_pose_model: Option<String>,
    pub eval: EvalConfig,
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub align: Option<AlignMode>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset_root: PathBuf,
    #[serde(default = "default_output")]
    output_dir: PathBuf,
    split: Option<String>,
    threads: Option<usize>,
    #[serde(default)]
    camera: RawCamera,
    #[serde(default)]
    range: RawRange,
    #[serde(default)]
    alignment: RawAlignment,
    #[serde(default)]
    pose_models: Vec<RawModel>,
    #[serde(default)]
    depth_models: Vec<RawModel>,
    #[serde(default)]
    measure: RawMeasure,
    #[serde(default)]
    evaluation: RawEval,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    width: u32,
    height: u32,
    hfov_deg: Option<f64>,
    vfov_deg: Option<f64>,
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
}

impl Default for RawCamera {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            hfov_deg: Some(69.4),
            vfov_deg: Some(42.5),
            fx: None,
            fy: None,
            cx: None,
            cy: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    min_m: f64,
    max_m: f64,
}

impl Default for RawRange {
    fn default() -> Self {
        let r = RangeFilter::default();
        Self { min_m: r.min_m(), max_m: r.max_m() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAlignment {
    mode: String,
    fixed_distance_m: f64,
    sample_stride: u32,
}

impl Default for RawAlignment {
    fn default() -> Self {
        Self { mode: "reference".into(), fixed_distance_m: DEFAULT_FIXED_DISTANCE_M, sample_stride: 4 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    method: Option<String>,
    #[serde(default = "default_backend")]
    backend: BackendKind,
    prediction_dir: Option<PathBuf>,
    model_path: Option<PathBuf>,
    input_size: Option<u32>,
    confidence_threshold: Option<f64>,
    iou_nms_threshold: Option<f64>,
    /// Convention of PFM files replayed by the file backend.
    convention: Option<String>,
}

fn default_backend() -> BackendKind {
    BackendKind::FileOracle
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    pose_model: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEval {
    iou_threshold: f64,
    kappa: f64,
    oks_threshold: f64,
    pr_confidence: f64,
}

impl Default for RawEval {
    fn default() -> Self {
        let oks = OksConfig::default();
        Self { iou_threshold: fruitlet_core::metrics::IOU_50, kappa: oks.kappa, oks_threshold: oks.threshold, pr_confidence: 0.25 }
    }
}

fn parse_convention(s: &str) -> Result<DepthConvention> {
    match s {
        "metric" => Ok(DepthConvention::MetricMeters),
        "relative-depth" => Ok(DepthConvention::RelativeDepth),
        "relative-inverse-depth" => Ok(DepthConvention::RelativeInverseDepth),
        other => Err(Error::Config(format!(
            "convention `{other}`: expected metric, relative-depth or relative-inverse-depth"
        ))),
    }
}

fn unit_interval(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base, overrides)
    }

    /// Parse and resolve; relative paths are joined onto `base`.
    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let c = &raw.camera;
        let camera = match (c.fx, c.fy, c.hfov_deg, c.vfov_deg) {
            (Some(fx), Some(fy), _, _) => CameraIntrinsics::new(
                fx,
                fy,
                c.cx.unwrap_or(c.width as f64 / 2.0),
                c.cy.unwrap_or(c.height as f64 / 2.0),
                c.width,
                c.height,
            ),
            (None, None, Some(h), Some(v)) => intrinsics_from_fov(c.width, c.height, h, v),
            _ => return Err(Error::Config("camera needs both fx and fy, or both hfov_deg and vfov_deg".into())),
        }
        .map_err(|e| Error::Config(format!("camera: {e}")))?;

        let range = RangeFilter::new(raw.range.min_m, raw.range.max_m).map_err(|e| Error::Config(format!("range: {e}")))?;

        let align = match overrides.align {
            Some(a) => a,
            None => match raw.alignment.mode.as_str() {
                "reference" => AlignMode::Reference,
                "fixed" => format!("fixed:{}", raw.alignment.fixed_distance_m).parse()?,
                other => return Err(Error::Config(format!("alignment mode `{other}`: expected reference or fixed"))),
            },
        };
        if raw.alignment.sample_stride == 0 {
            return Err(Error::Config("alignment.sample_stride must be at least 1".into()));
        }

        let backend = |m: &RawModel, what: &str, default_size: u32| -> Result<BackendConfig> {
            let kind = overrides.backend.unwrap_or(m.backend);
            let path = match kind {
                BackendKind::FileOracle => m.prediction_dir.as_ref(),
                BackendKind::Onnx => m.model_path.as_ref(),
            }
            .ok_or_else(|| {
                let key = if kind == BackendKind::Onnx { "model_path" } else { "prediction_dir" };
                Error::Config(format!("{what}: backend needs `{key}`"))
            })?;
            let mut cfg = match kind {
                BackendKind::FileOracle => BackendConfig::file_oracle(resolve(path)),
                BackendKind::Onnx => BackendConfig::onnx(resolve(path), default_size),
            };
            if let Some(s) = m.input_size {
                cfg.input_size = s;
            }
            if let Some(t) = m.confidence_threshold {
                cfg.confidence_threshold = t;
            }
            if let Some(t) = m.iou_nms_threshold {
                cfg.iou_nms_threshold = t;
            }
            if let Some(c) = &m.convention {
                cfg.depth_convention = parse_convention(c)?;
            }
            cfg.validate().map_err(|e| Error::Config(format!("{what}: {e}")))?;
            Ok(cfg)
        };

        let mut pose_models = Vec::new();
        for (i, m) in raw.pose_models.iter().enumerate() {
            let name = m.name.clone().ok_or_else(|| Error::Config(format!("pose_models[{i}] needs a name")))?;
            if pose_models.iter().any(|p: &PoseModel| p.name == name) {
                return Err(Error::Config(format!("pose model `{name}` defined twice")));
            }
            let backend = backend(m, &format!("pose model `{name}`"), 640)?;
            pose_models.push(PoseModel { name, backend });
        }

        let mut depth_models = Vec::new();
        for (i, m) in raw.depth_models.iter().enumerate() {
            let method: DepthMethod = m
                .method
                .as_deref()
                .ok_or_else(|| Error::Config(format!("depth_models[{i}] needs a method")))?
                .parse()
                .map_err(|e: fruitlet_core::Error| Error::Config(e.to_string()))?;
            if method == DepthMethod::RealSense {
                return Err(Error::Config("realsense depth is read from the dataset, not a model".into()));
            }
            if depth_models.iter().any(|d: &DepthModel| d.method == method) {
                return Err(Error::Config(format!("depth method `{method}` defined twice")));
            }
            let backend = backend(m, &format!("depth model `{method}`"), 518)?;
            depth_models.push(DepthModel { method, backend });
        }

        let measure_pose_model = match raw.measure.pose_model {
            Some(name) if !pose_models.iter().any(|p| p.name == name) => {
                return Err(Error::Config(format!("measure.pose_model `{name}` is not a configured pose model")))
            }
            Some(name) => Some(name),
            None => pose_models.first().map(|p| p.name.clone()),
        };

        let e = &raw.evaluation;
        if !(e.kappa > 0.0 && e.kappa.is_finite()) {
            return Err(Error::Config(format!("evaluation.kappa = {} must be positive", e.kappa)));
        }
        let eval = EvalConfig {
            iou_threshold: unit_interval("evaluation.iou_threshold", e.iou_threshold)?,
            oks: OksConfig { kappa: e.kappa, threshold: unit_interval("evaluation.oks_threshold", e.oks_threshold)? },
            pr_confidence: unit_interval("evaluation.pr_confidence", e.pr_confidence)?,
        };

        let dataset_root = resolve(&raw.dataset_root);
        if !dataset_root.is_dir() {
            return Err(Error::Config(format!("dataset_root {} is not a directory", dataset_root.display())));
        }
        if raw.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }

        Ok(Self {
            dataset_root,
            output_dir: overrides.output_dir.clone().unwrap_or_else(|| resolve(&raw.output_dir)),
            split: raw.split.as_deref().map(str::parse).transpose().map_err(|e: Error| Error::Config(e.to_string()))?,
            threads: raw.threads,
            camera,
            range,
            align,
            sample_stride: raw.alignment.sample_stride,
            pose_models,
            depth_models,
            measure_pose_model,
            eval,
        })
    }

    /// Worker count: environment, then file, then logical CPUs.
    pub fn worker_threads(&self) -> Result<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!("{THREADS_ENV}=`{v}` is not a positive integer"))),
            },
            Err(_) => Ok(self.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
        }
    }

    pub fn depth_model(&self, method: DepthMethod) -> Option<&DepthModel> {
        self.depth_models.iter().find(|d| d.method == method)
    }

    pub fn pose_model(&self, name: &str) -> Option<&PoseModel> {
        self.pose_models.iter().find(|p| p.name == name)
    }
}
