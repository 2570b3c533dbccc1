use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fruitlet_core::DepthMethod;
use fruitlet_metric::commands::{self, Pipeline};
use fruitlet_metric::config::{AlignMode, Overrides, PipelineConfig};
use fruitlet_metric::inference::BackendKind;
use fruitlet_metric::{Error, Result};

/// Metric fruitlet length from pose keypoints and depth, plus detection
/// and length-accuracy evaluation.
#[derive(Debug, Parser)]
#[command(name = "fruitlet-metric", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one point cloud per image and an alignment log.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Depth source: realsense, dpt or depth-anything-v2. Defaults to
        /// the first configured depth model, else realsense.
        #[arg(long)]
        method: Option<DepthMethod>,
    },
    /// Measure lengths and pair them with ground truth into lengths.csv.
    Measure {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every pose model into metrics.csv and summary.txt.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Render boxplot.svg and report.md.
    Report {
        #[command(flatten)]
        common: Common,
        /// Per-fruit lengths table; defaults to <out>/lengths.csv.
        #[arg(long)]
        lengths: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Override the backend of every model: file or onnx.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// `reference` or `fixed:<meters>`.
    #[arg(long, value_parser = parse_align)]
    align: Option<AlignMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    match s {
        "file" | "file-oracle" => Ok(BackendKind::FileOracle),
        "onnx" => Ok(BackendKind::Onnx),
        other => Err(format!("unknown backend `{other}`, expected file or onnx")),
    }
}

fn parse_align(s: &str) -> std::result::Result<AlignMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let overrides = Overrides { backend: self.backend, align: self.align, output_dir: self.out.clone() };
        PipelineConfig::load(&self.config, &overrides)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reconstruct { common, method } => {
            let cfg = common.load()?;
            let method = method.unwrap_or_else(|| cfg.depth_models.first().map_or(DepthMethod::RealSense, |d| d.method));
            let s = Pipeline::new(cfg)?.reconstruct(method)?;
            println!("{} clouds written, {} images skipped", s.written.len(), s.skipped.len());
        }
        Command::Measure { common } => {
            let s = Pipeline::new(common.load()?)?.measure()?;
            println!("{} length records written to {}", s.records.len(), s.path.display());
        }
        Command::Eval { common } => {
            let p = Pipeline::new(common.load()?)?;
            let rows = p.eval()?;
            print!("{}", fruitlet_metric::report::render_summary(&rows));
        }
        Command::Report { common, lengths } => {
            let cfg = common.load()?;
            let s = commands::report(&cfg.output_dir, lengths.as_deref())?;
            println!("wrote {} and {}", s.report.display(), s.boxplot.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
