//! The four pipeline commands.
//!
//! Dataset layout under `dataset_root`:
//!
//! ```text
//! images/<id>.png|jpg     RGB frames (optional for file backends)
//! labels/<id>.txt         annotated poses, one fruitlet per line
//! depth/<id>.png          sensor depth, 16-bit millimeters
//! ground_truth.csv        caliper lengths: image_id,fruit_id,length_mm
//! splits.txt              optional split manifest
//! ```
//!
//! A ground-truth `fruit_id` of `f<k>` or `<k>` refers to the k-th
//! annotation (1-based) in `labels/<id>.txt`; its box center locates the
//! fruitlet in the image.
//!
//! Images are processed on a worker pool; every output is collected and
//! sorted before writing, so files do not depend on scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use fruitlet_core::metrics::{average_precision, pooled_counts, precision_recall, Criterion, ImageDetections};
use fruitlet_core::{
    depth_to_cloud, fit_fixed_distance, fit_scale, match_to_ground_truth, mean_phase_timing, measure_length, to_metric,
    DepthConvention, DepthMap, DepthMethod, GroundTruthLength, LengthRecord, LocatedTruth, MeasuredPose, PhaseTiming,
    PoseDetection, Rgb, RgbView, ScaleAlignment,
};
use image::RgbImage;
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{AlignMode, PipelineConfig};
use crate::formats::depth::load_depth;
use crate::formats::lengths::{read_lengths, write_lengths};
use crate::formats::ply::{write_ply, PlyFormat};
use crate::formats::pose::parse_pose_file;
use crate::formats::split::SplitManifest;
use crate::formats::truth::parse_ground_truth;
use crate::inference::{open_depth_backend, open_pose_backend, BackendConfig, DepthBackend, Frame, PoseBackend};
use crate::report::{self, MetricsRow};
use crate::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image ids and file lookup for one dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    ids: Vec<String>,
}

fn stems(dir: &Path, extensions: &[&str], into: &mut BTreeSet<String>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                into.insert(stem.to_string());
            }
        }
    }
    Ok(())
}

impl Dataset {
    /// Every id with an image, label or depth file, sorted, restricted to
    /// the configured split.
    pub fn open(cfg: &PipelineConfig) -> Result<Self> {
        let root = cfg.dataset_root.clone();
        let mut ids = BTreeSet::new();
        stems(&root.join("images"), &IMAGE_EXTENSIONS, &mut ids)?;
        stems(&root.join("labels"), &["txt"], &mut ids)?;
        stems(&root.join("depth"), &["png"], &mut ids)?;
        if let Some(split) = cfg.split {
            let path = root.join("splits.txt");
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("split `{split}` needs {}: {e}", path.display())))?;
            let manifest = SplitManifest::parse(&text)?;
            ids.retain(|id| manifest.split_of(id) == Some(split));
        }
        Ok(Self { root, ids: ids.into_iter().collect() })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    fn label_path(&self, id: &str) -> PathBuf {
        self.root.join("labels").join(format!("{id}.txt"))
    }

    /// Annotated poses, `None` when the image has no label file.
    pub fn labels(&self, id: &str) -> Result<Option<Vec<PoseDetection>>> {
        let path = self.label_path(id);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        parse_pose_file(&text, id)
            .map(Some)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn rgb(&self, id: &str) -> Result<Option<RgbImage>> {
        let Some(path) = IMAGE_EXTENSIONS
            .iter()
            .map(|ext| self.root.join("images").join(format!("{id}.{ext}")))
            .find(|p| p.is_file())
        else {
            return Ok(None);
        };
        let img = image::open(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(Some(img.to_rgb8()))
    }

    pub fn sensor_depth(&self, id: &str, size: (u32, u32)) -> Result<DepthMap> {
        load_depth(&self.root.join("depth").join(format!("{id}.png")), DepthConvention::MetricMeters, Some(size))
    }

    pub fn ground_truth(&self) -> Result<Vec<GroundTruthLength>> {
        let path = self.root.join("ground_truth.csv");
        let file = fs::File::open(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        parse_ground_truth(file)
    }
}

/// Index of the annotation a ground-truth `fruit_id` refers to.
pub fn annotation_index(fruit_id: &str) -> Option<usize> {
    let digits = fruit_id.strip_prefix('f').unwrap_or(fruit_id);
    match digits.parse::<usize>() {
        Ok(k) if k >= 1 => Some(k - 1),
        _ => None,
    }
}

/// One lazily built backend per pool thread.
struct PerWorker<B> {
    slots: Vec<Mutex<Option<B>>>,
}

impl<B> PerWorker<B> {
    fn new(threads: usize) -> Self {
        Self { slots: (0..threads).map(|_| Mutex::new(None)).collect() }
    }

    fn seed(self, backend: B) -> Self {
        *self.slots[0].lock().expect("worker slot") = Some(backend);
        self
    }

    fn with<T>(&self, make: impl FnOnce() -> Result<B>, f: impl FnOnce(&mut B) -> Result<T>) -> Result<T> {
        let i = rayon::current_thread_index().unwrap_or(0) % self.slots.len();
        let mut slot = self.slots[i].lock().expect("worker slot");
        if slot.is_none() {
            *slot = Some(make()?);
        }
        f(slot.as_mut().expect("slot filled above"))
    }
}

type PoseWorkers = PerWorker<Box<dyn PoseBackend>>;
type DepthWorkers = PerWorker<Box<dyn DepthBackend>>;

fn pose_workers(cfg: &BackendConfig, threads: usize) -> Result<PoseWorkers> {
    Ok(PerWorker::new(threads).seed(open_pose_backend(cfg)?))
}

fn depth_workers(cfg: &BackendConfig, threads: usize) -> Result<DepthWorkers> {
    Ok(PerWorker::new(threads).seed(open_depth_backend(cfg)?))
}

/// Shared state of one command run.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub dataset: Dataset,
    threads: usize,
    pool: rayon::ThreadPool,
}

/// Per-image outcome in a log.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub image_id: String,
    pub reason: String,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let threads = cfg.worker_threads()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        let dataset = Dataset::open(&cfg)?;
        Ok(Self { cfg, dataset, threads, pool })
    }

    fn size(&self) -> (u32, u32) {
        (self.cfg.camera.width, self.cfg.camera.height)
    }

    fn frame(&self, id: &str) -> Result<Frame> {
        match self.dataset.rgb(id)? {
            Some(rgb) => {
                if rgb.dimensions() != self.size() {
                    return Err(Error::Dimension { expected: self.size(), found: rgb.dimensions() });
                }
                Ok(Frame::with_rgb(id, rgb))
            }
            None => Ok(Frame::new(id, self.size().0, self.size().1)),
        }
    }

    fn require_images(&self) -> Result<()> {
        if self.dataset.ids().is_empty() {
            return Err(Error::EmptyInput(format!("no images under {}", self.cfg.dataset_root.display())));
        }
        Ok(())
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.cfg.output_dir).map_err(|e| Error::io(&self.cfg.output_dir, e))?;
        Ok(self.cfg.output_dir.join(name))
    }

    /// Metric depth of one image from one source, with the alignment used.
    fn metric_depth(&self, id: &str, frame: &Frame, method: DepthMethod, workers: Option<&DepthWorkers>) -> Result<(DepthMap, ScaleAlignment)> {
        let (Some(model), Some(workers)) = (self.cfg.depth_model(method), workers) else {
            let depth = self.dataset.sensor_depth(id, self.size())?;
            let n = depth.valid_count();
            return Ok((depth, ScaleAlignment::identity(n)));
        };
        let (relative, _) = workers.with(|| open_depth_backend(&model.backend), |b| b.estimate_depth(frame))?;
        if relative.convention() == DepthConvention::MetricMeters {
            let n = relative.valid_count();
            return Ok((relative, ScaleAlignment::identity(n)));
        }
        let align = match self.cfg.align {
            AlignMode::Reference => fit_scale(&relative, &self.dataset.sensor_depth(id, self.size())?, self.cfg.sample_stride)?,
            AlignMode::Fixed(d) => fit_fixed_distance(&relative, d, self.cfg.sample_stride)?,
        };
        Ok((to_metric(&relative, &align)?, align))
    }

    fn depth_workers_for(&self, method: DepthMethod) -> Result<Option<DepthWorkers>> {
        self.cfg.depth_model(method).map(|m| depth_workers(&m.backend, self.threads)).transpose()
    }

    /// Write `clouds/<id>.ply` for every image and `alignment.log`.
    pub fn reconstruct(&self, method: DepthMethod) -> Result<ReconstructSummary> {
        self.require_images()?;
        if method != DepthMethod::RealSense && self.cfg.depth_model(method).is_none() {
            return Err(Error::Config(format!("no depth model configured for `{method}`")));
        }
        let workers = self.depth_workers_for(method)?;
        let clouds = self.output("clouds")?;
        fs::create_dir_all(&clouds).map_err(|e| Error::io(&clouds, e))?;

        type Written = Result<(PathBuf, usize, ScaleAlignment)>;
        let results: Vec<(String, Written)> = self.pool.install(|| {
            self.dataset
                .ids()
                .par_iter()
                .map(|id| {
                    let run = || -> Result<(PathBuf, usize, ScaleAlignment)> {
                        let frame = self.frame(id)?;
                        let (depth, align) = self.metric_depth(id, &frame, method, workers.as_ref())?;
                        let pixels: Option<Vec<Rgb>> = frame.rgb.as_ref().map(|img| img.pixels().map(|p| p.0).collect());
                        let view = match &pixels {
                            Some(p) => Some(RgbView::new(frame.width, frame.height, p)?),
                            None => None,
                        };
                        let cloud = depth_to_cloud(&depth, &self.cfg.camera, &self.cfg.range, view)?;
                        let path = clouds.join(format!("{id}.ply"));
                        write_ply(&cloud, &path, PlyFormat::BinaryLittleEndian)?;
                        Ok((path, cloud.len(), align))
                    };
                    (id.clone(), run())
                })
                .collect()
        });

        let mut log = String::new();
        let mut summary = ReconstructSummary::default();
        for (id, r) in results {
            match r {
                Ok((path, points, a)) => {
                    log.push_str(&format!(
                        "{id}\t{method}\tspace={} scale={} shift={} residual_rmse_m={} inliers={} points={points}\n",
                        a.space.name(),
                        a.scale,
                        a.shift,
                        a.residual_rmse,
                        a.inlier_count
                    ));
                    summary.written.push(path);
                }
                Err(e) => {
                    warn!("{id}: skipped: {e}");
                    log.push_str(&format!("{id}\t{method}\tskipped: {e}\n"));
                    summary.skipped.push(Skipped { image_id: id, reason: e.to_string() });
                }
            }
        }
        let log_path = self.output("alignment.log")?;
        fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
        if summary.written.is_empty() {
            return Err(Error::AllFailed(format!("{} images, no cloud written", summary.skipped.len())));
        }
        info!("wrote {} clouds, skipped {}", summary.written.len(), summary.skipped.len());
        Ok(summary)
    }

    /// Detections to measure for one image: the configured pose model, or
    /// the annotations themselves when no model is configured.
    fn measured_detections(&self, id: &str, frame: &Frame, workers: Option<&PoseWorkers>) -> Result<Vec<PoseDetection>> {
        match (&self.cfg.measure_pose_model, workers) {
            (Some(name), Some(w)) => {
                let model = self.cfg.pose_model(name).expect("validated at load");
                Ok(w.with(|| open_pose_backend(&model.backend), |b| b.detect_pose(frame))?.0)
            }
            _ => self.dataset.labels(id)?.ok_or_else(|| Error::Format(format!("{id}: no label file"))),
        }
    }

    /// Pair measured lengths with ground truth for every depth source and
    /// write `lengths.csv`, sorted by image, fruit and method.
    pub fn measure(&self) -> Result<MeasureSummary> {
        self.require_images()?;
        let truth = self.dataset.ground_truth()?;
        let mut by_image: BTreeMap<&str, Vec<&GroundTruthLength>> = BTreeMap::new();
        for t in &truth {
            by_image.entry(t.image_id.as_str()).or_default().push(t);
        }
        let ids: Vec<&String> = self.dataset.ids().iter().filter(|id| by_image.contains_key(id.as_str())).collect();
        if ids.is_empty() {
            return Err(Error::EmptyInput("no image has ground-truth lengths".into()));
        }
        let pose = match &self.cfg.measure_pose_model {
            Some(name) => Some(pose_workers(&self.cfg.pose_model(name).expect("validated at load").backend, self.threads)?),
            None => None,
        };
        let mut methods = vec![DepthMethod::RealSense];
        methods.extend(self.cfg.depth_models.iter().map(|d| d.method));
        let depth: Vec<Option<DepthWorkers>> =
            methods.iter().map(|&m| self.depth_workers_for(m)).collect::<Result<_>>()?;

        type PerImage = (Vec<LengthRecord>, Vec<Skipped>, bool);
        let results: Vec<PerImage> = self.pool.install(|| {
            ids.par_iter()
                .map(|id| {
                    let mut records = Vec::new();
                    let mut skipped = Vec::new();
                    let skip = |skipped: &mut Vec<Skipped>, what: String| {
                        warn!("{id}: {what}");
                        skipped.push(Skipped { image_id: id.to_string(), reason: what });
                    };
                    let prepared = (|| -> Result<(Frame, Vec<PoseDetection>, Vec<LocatedTruth>)> {
                        let frame = self.frame(id)?;
                        let dets = self.measured_detections(id, &frame, pose.as_ref())?;
                        let labels = self.dataset.labels(id)?.unwrap_or_default();
                        let mut located = Vec::new();
                        for t in &by_image[id.as_str()] {
                            match annotation_index(&t.fruit_id).and_then(|k| labels.get(k)) {
                                Some(ann) => located.push(LocatedTruth {
                                    truth: (*t).clone(),
                                    center_px: self.cfg.camera.denormalize(ann.bbox.cx, ann.bbox.cy),
                                }),
                                None => warn!("{id}: fruit `{}` has no matching annotation", t.fruit_id),
                            }
                        }
                        Ok((frame, dets, located))
                    })();
                    let (frame, dets, located) = match prepared {
                        Ok(p) => p,
                        Err(e) => {
                            skip(&mut skipped, e.to_string());
                            return (records, skipped, false);
                        }
                    };
                    let mut any = false;
                    for (&method, workers) in methods.iter().zip(&depth) {
                        let depth = match self.metric_depth(id, &frame, method, workers.as_ref()) {
                            Ok((d, _)) => d,
                            Err(e) => {
                                skip(&mut skipped, format!("{method}: {e}"));
                                continue;
                            }
                        };
                        any = true;
                        let measured: Vec<MeasuredPose> = dets
                            .iter()
                            .filter_map(|d| match measure_length(d, &depth, &self.cfg.camera) {
                                Ok(m) => Some(m),
                                Err(e) => {
                                    log::debug!("{id}: {method}: detection dropped: {e}");
                                    None
                                }
                            })
                            .collect();
                        let pairing = match_to_ground_truth(&measured, &located, id, &self.cfg.camera, method);
                        records.extend(pairing.records);
                    }
                    (records, skipped, any)
                })
                .collect()
        });

        let mut summary = MeasureSummary::default();
        let mut records = Vec::new();
        let mut any_ok = false;
        for (r, s, ok) in results {
            records.extend(r);
            summary.skipped.extend(s);
            any_ok |= ok;
        }
        if !any_ok {
            return Err(Error::AllFailed(format!("{} images, none measurable", ids.len())));
        }
        let rank = |m: DepthMethod| DepthMethod::ALL.iter().position(|&x| x == m);
        records.sort_by(|a, b| {
            (a.image_id.as_str(), a.fruit_id.as_str(), rank(a.method)).cmp(&(b.image_id.as_str(), b.fruit_id.as_str(), rank(b.method)))
        });
        let path = self.output("lengths.csv")?;
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_lengths(&records, BufWriter::new(file))?;
        summary.records = records;
        summary.path = path;
        Ok(summary)
    }

    /// Detection and pose quality of every pose model; writes
    /// `metrics.csv` and `summary.txt`.
    pub fn eval(&self) -> Result<Vec<MetricsRow>> {
        self.require_images()?;
        if self.cfg.pose_models.is_empty() {
            return Err(Error::Config("eval needs at least one [[pose_models]] entry".into()));
        }
        let labeled: Vec<(&String, Vec<PoseDetection>)> = self
            .dataset
            .ids()
            .iter()
            .filter_map(|id| match self.dataset.labels(id) {
                Ok(Some(l)) => Some(Ok((id, l))),
                Ok(None) => {
                    warn!("{id}: no label file, not evaluated");
                    None
                }
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_>>()?;
        if labeled.is_empty() {
            return Err(Error::EmptyInput("no labeled images".into()));
        }

        let e = &self.cfg.eval;
        let mut rows = Vec::new();
        for model in &self.cfg.pose_models {
            let workers = pose_workers(&model.backend, self.threads)?;
            let results: Vec<Result<(Vec<PoseDetection>, PhaseTiming)>> = self.pool.install(|| {
                labeled
                    .par_iter()
                    .map(|(id, _)| {
                        let frame = self.frame(id)?;
                        workers.with(|| open_pose_backend(&model.backend), |b| b.detect_pose(&frame))
                    })
                    .collect()
            });
            let mut images = Vec::new();
            let mut timings = Vec::new();
            for ((id, truths), r) in labeled.iter().zip(results) {
                match r {
                    Ok((predictions, t)) => {
                        images.push(ImageDetections { predictions, truths: truths.clone() });
                        timings.push(t);
                    }
                    Err(err) => warn!("{}: {id}: skipped: {err}", model.name),
                }
            }
            if images.is_empty() {
                return Err(Error::AllFailed(format!("pose model `{}` failed on every image", model.name)));
            }
            let boxes = Criterion::BoxIou(e.iou_threshold);
            let poses = Criterion::PoseOks(e.oks);
            let box_pr = precision_recall(pooled_counts(&images, boxes, e.pr_confidence)?);
            let pose_pr = precision_recall(pooled_counts(&images, poses, e.pr_confidence)?);
            let ap = |c: Criterion| match average_precision(&images, c) {
                Ok(curve) => Ok(Some(curve.ap)),
                Err(fruitlet_core::Error::UndefinedAp) => Ok(None),
                Err(err) => Err(Error::from(err)),
            };
            let t = mean_phase_timing(&timings)?;
            rows.push(MetricsRow {
                model: model.name.clone(),
                box_precision: box_pr.precision,
                box_recall: box_pr.recall,
                box_map50: ap(boxes)?,
                pose_precision: pose_pr.precision,
                pose_recall: pose_pr.recall,
                pose_map50: ap(poses)?,
                images: images.len(),
                preprocess_ms: t.preprocess_ms,
                inference_ms: t.inference_ms,
                postprocess_ms: t.postprocess_ms,
            });
        }
        let path = self.output("metrics.csv")?;
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        report::write_metrics(&rows, BufWriter::new(file))?;
        let summary = self.output("summary.txt")?;
        fs::write(&summary, report::render_summary(&rows)).map_err(|e| Error::io(&summary, e))?;
        Ok(rows)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructSummary {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Default)]
pub struct MeasureSummary {
    pub path: PathBuf,
    pub records: Vec<LengthRecord>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub boxplot: PathBuf,
    pub report: PathBuf,
    pub missing_methods: Vec<DepthMethod>,
}

/// Render `boxplot.svg` and `report.md` from a lengths table and, when
/// present, `metrics.csv` in the output directory.
pub fn report(output_dir: &Path, lengths: Option<&Path>) -> Result<ReportSummary> {
    let lengths_path = lengths.map(Path::to_path_buf).unwrap_or_else(|| output_dir.join("lengths.csv"));
    let file = fs::File::open(&lengths_path).map_err(|e| Error::Config(format!("{}: {e}", lengths_path.display())))?;
    let records = read_lengths(file)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", lengths_path.display())));
    }
    let metrics_path = output_dir.join("metrics.csv");
    let metrics = if metrics_path.is_file() {
        let f = fs::File::open(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        Some(report::read_metrics(f)?)
    } else {
        None
    };
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let (series, missing) = report::length_series(&records)?;
    let boxplot = output_dir.join("boxplot.svg");
    fs::write(&boxplot, report::render_boxplot_svg(&series, &missing)).map_err(|e| Error::io(&boxplot, e))?;
    let md = report::render_report(metrics.as_deref(), &records, "boxplot.svg")?;
    let report_path = output_dir.join("report.md");
    fs::write(&report_path, md).map_err(|e| Error::io(&report_path, e))?;
    Ok(ReportSummary { boxplot, report: report_path, missing_methods: missing })
}
