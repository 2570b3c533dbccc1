//! Synthetic datasets on disk: a plane tilted away from the camera,
//! fruitlets annotated on it, sensor depth, relative depth for two
//! networks and caliper lengths.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fruitlet_core::{
    backproject, intrinsics_from_fov, BBox, CameraIntrinsics, DepthConvention, DepthMap, GroundTruthLength, Keypoint,
    PoseDetection, Visibility,
};
use fruitlet_metric::formats::depth::{save_pfm, write_png16};
use fruitlet_metric::formats::pose::write_pose_file;
use fruitlet_metric::formats::truth::write_ground_truth;
use tempfile::TempDir;

pub const W: u32 = 160;
pub const H: u32 = 120;
pub const HFOV: f64 = 69.4;
pub const VFOV: f64 = 42.5;

pub fn camera() -> CameraIntrinsics {
    intrinsics_from_fov(W, H, HFOV, VFOV).unwrap()
}

/// Plane depth at pixel row `row`, rounded to whole millimeters so the
/// sensor PNG stores it exactly.
pub fn plane_depth(row: u32) -> f64 {
    ((0.55 + 0.1 * row as f64 / H as f64) * 1000.0).round() / 1000.0
}

pub fn sensor_depth() -> DepthMap {
    let values = (0..H).flat_map(|r| (0..W).map(move |_| plane_depth(r))).collect();
    DepthMap::new(W, H, values, DepthConvention::MetricMeters).unwrap()
}

/// Relative inverse depth `a / z + b` of the plane.
pub fn relative_depth(a: f64, b: f64) -> DepthMap {
    let values = sensor_depth().values().iter().map(|z| a / z + b).collect();
    DepthMap::new(W, H, values, DepthConvention::RelativeInverseDepth).unwrap()
}

/// Two fruitlets per image with keypoints on pixel centers.
pub fn fruitlets(image_id: &str, seed: usize) -> Vec<PoseDetection> {
    let k = camera();
    let spots = [(40.0 + seed as f64 * 7.0, 30.0, 14.0), (110.0 - seed as f64 * 5.0, 75.0, 10.0)];
    spots
        .iter()
        .enumerate()
        .map(|(i, &(u, v, half))| {
            let (cx, cy) = k.normalize(u, v);
            let (cax, cay) = k.normalize(u, v - half);
            let (pex, pey) = k.normalize(u, v + half);
            PoseDetection {
                image_id: image_id.into(),
                bbox: BBox::clamped(cx, cy, (2.4 * half) / W as f64, (2.4 * half) / H as f64).unwrap(),
                confidence: 0.9 - 0.1 * i as f64,
                calyx: Keypoint::new(cax, cay, Visibility::Visible),
                peduncle: Keypoint::new(pex, pey, Visibility::Visible),
            }
        })
        .collect()
}

/// Chord length of a fruitlet on the plane, millimeters.
pub fn true_length_mm(d: &PoseDetection) -> f64 {
    let k = camera();
    let lift = |kp: &Keypoint| {
        let (u, v) = k.denormalize(kp.x, kp.y);
        backproject(u, v, plane_depth(v.round() as u32), &k).unwrap()
    };
    1000.0 * lift(&d.calyx).distance(&lift(&d.peduncle))
}

/// Caliper offsets added to the true chord, per fruitlet.
pub const CALIPER_OFFSET_MM: [f64; 2] = [0.8, -0.4];

pub struct Scene {
    pub dir: TempDir,
    pub ids: Vec<String>,
}

impl Scene {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn data(&self) -> PathBuf {
        self.root().join("data")
    }

    pub fn out(&self) -> PathBuf {
        self.root().join("out")
    }

    pub fn config(&self) -> PathBuf {
        self.root().join("pipeline.toml")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SceneOptions {
    pub images: usize,
    pub depth_models: bool,
    pub pose_model: bool,
    pub rgb: bool,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self { images: 3, depth_models: true, pose_model: true, rgb: false }
    }
}

pub fn scene(opts: SceneOptions) -> Scene {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    for sub in ["labels", "depth", "images"] {
        fs::create_dir_all(data.join(sub)).unwrap();
    }
    for sub in ["pose", "dpt", "dav2"] {
        fs::create_dir_all(root.join("pred").join(sub)).unwrap();
    }
    let mut ids = Vec::new();
    let mut truth = Vec::new();
    for i in 0..opts.images {
        let id = format!("img{i:02}");
        let fruits = fruitlets(&id, i);
        fs::write(data.join("labels").join(format!("{id}.txt")), write_pose_file(&fruits, false)).unwrap();
        // predictions: the annotations plus one low-confidence miss
        let mut preds = fruits.clone();
        let mut stray = fruits[0].clone();
        stray.bbox = BBox::clamped(0.9, 0.9, 0.05, 0.05).unwrap();
        stray.confidence = 0.3;
        preds.push(stray);
        fs::write(root.join("pred/pose").join(format!("{id}.txt")), write_pose_file(&preds, true)).unwrap();
        write_png16(&sensor_depth(), &data.join("depth").join(format!("{id}.png"))).unwrap();
        save_pfm(&relative_depth(2.0, 0.3), &root.join("pred/dpt").join(format!("{id}.pfm"))).unwrap();
        save_pfm(&relative_depth(1.5, 0.1), &root.join("pred/dav2").join(format!("{id}.pfm"))).unwrap();
        if opts.rgb {
            let img = image::RgbImage::from_fn(W, H, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 128]));
            img.save(data.join("images").join(format!("{id}.png"))).unwrap();
        }
        for (j, f) in fruits.iter().enumerate() {
            truth.push(GroundTruthLength {
                image_id: id.clone(),
                fruit_id: format!("f{}", j + 1),
                length_mm: true_length_mm(f) + CALIPER_OFFSET_MM[j],
            });
        }
        ids.push(id);
    }
    let mut gt = Vec::new();
    write_ground_truth(&truth, &mut gt).unwrap();
    fs::write(data.join("ground_truth.csv"), gt).unwrap();

    let mut cfg = format!(
        "dataset_root = \"data\"\noutput_dir = \"out\"\n\n[camera]\nwidth = {W}\nheight = {H}\nhfov_deg = {HFOV}\nvfov_deg = {VFOV}\n\n[alignment]\nmode = \"reference\"\nsample_stride = 2\n"
    );
    if opts.pose_model {
        cfg.push_str("\n[[pose_models]]\nname = \"oracle\"\nbackend = \"file\"\nprediction_dir = \"pred/pose\"\nconfidence_threshold = 0.0\n");
    }
    if opts.depth_models {
        cfg.push_str("\n[[depth_models]]\nmethod = \"dpt\"\nbackend = \"file\"\nprediction_dir = \"pred/dpt\"\n");
        cfg.push_str("\n[[depth_models]]\nmethod = \"depth-anything-v2\"\nbackend = \"file\"\nprediction_dir = \"pred/dav2\"\n");
    }
    fs::write(root.join("pipeline.toml"), cfg).unwrap();
    Scene { dir, ids }
}

pub fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fruitlet-metric"));
    cmd.args(args).env_remove("FRUITLET_METRIC_THREADS").env("RUST_LOG", "error");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

/// Run a subcommand against the scene's config.
pub fn run(scene: &Scene, sub: &str, extra: &[&str]) -> Output {
    let config = scene.config();
    let mut args = vec![sub, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    run_cli(&args, &[])
}

/// CSV text with the named columns removed.
pub fn drop_columns(csv_text: &str, names: &[&str]) -> String {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !names.contains(&header[i])).collect();
    let pick = |l: &str| {
        let f: Vec<&str> = l.split(',').collect();
        keep.iter().map(|&i| f[i]).collect::<Vec<_>>().join(",")
    };
    let mut out = pick(&header.join(","));
    for l in lines {
        out.push('\n');
        out.push_str(&pick(l));
    }
    out
}
