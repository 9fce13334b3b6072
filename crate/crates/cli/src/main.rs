//! `depthforge`: synthesize scenes, corrupt them, run both enhancement
//! stages, and evaluate.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
//! failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depthforge::config::KeyValues;
use depthforge::run::RunConfig;
use depthforge::{Error, ErrorKind};

const CSV_HELP: &str = "\
Report CSV columns: run_id,protocol,condition,rmse,delta_1.25,tau,n_pixels,seed
  run_id     method and seed, e.g. refined-s3; aggregate rows use <method>-mean
  condition  outlier fraction (noisy-completion) or H2I condition (inpainting)
  rmse       sqrt(mean squared error) in scene units
  delta_1.25 fraction of pixels with max(d/d*, d*/d) < 1.25
  tau        Kendall tau-a
  n_pixels   evaluated pixels; seed is empty on aggregate rows

Environment: DEPTHFORGE_THREADS caps the worker threads.";

#[derive(Parser, Debug)]
#[command(name = "depthforge", version, about = "Uncertainty-guided depth enhancement", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by every subcommand. Precedence, lowest first:
/// built-in defaults, `--config` file, `--set` pairs, dedicated flags.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Plain-text key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. --set tau=400.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    /// Certainty threshold on the ensemble variance (normalized units).
    #[arg(long)]
    eps: Option<f64>,
    /// Ensemble size N.
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    /// Propagation iterations K.
    #[arg(long)]
    iterations: Option<usize>,
    /// Seeds: a..b (inclusive) or a comma list.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate seeded RGB-D scenes (scene_<seed>.ppm / .pfm and manifest.csv).
    Synth {
        /// Scene size HxW.
        #[arg(long)]
        dims: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Degrade a depth map: sparse samples with outliers, holes, or a
    /// structured mask.
    Corrupt {
        #[arg(long)]
        depth: PathBuf,
        /// sparse+noise, holes or structured-mask.
        #[arg(long, default_value = "sparse+noise")]
        mode: String,
        #[arg(long = "noise-ratio", default_value_t = 0.1)]
        noise_ratio: f64,
        /// Outlier standard deviation in scene units; default 15% of range.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long = "sparse-count")]
        sparse_count: Option<usize>,
        /// Removed-area range lo,hi for holes.
        #[arg(long, default_value = "0.01,0.1")]
        h2i: String,
        /// Kept fraction for the structured mask.
        #[arg(long, default_value_t = 0.5)]
        coverage: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Stage 1: ensemble mean and variance (mu.pfm, sigma2.pfm, mask_sigma.pgm).
    Estimate {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Stage 2 from a stored stage-1 result.
    Refine {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        sigma2: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Both stages end to end, plus the diff-only reconstruction.
    Pipeline {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Score a prediction against ground truth and print a report row.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// PGM mask of evaluated pixels; default every valid truth pixel.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Write |error| as an 8-bit PGM.
        #[arg(long = "error-map")]
        error_map: Option<PathBuf>,
        /// Fixed lo,hi range for the error map; default per image.
        #[arg(long = "error-range")]
        error_range: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a protocol over the seed grid and write report.csv.
    Experiment {
        #[arg(long, default_value = "noisy-completion")]
        protocol: String,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one factor on the noisy-completion suite; writes sweep.csv and
    /// grayscale panels.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Outlier fraction of the swept suite.
        #[arg(long = "noise-ratio", default_value_t = 0.1)]
        noise_ratio: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    DiffOnly,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    NSamples,
    Epsilon,
    Sigma2Ablation,
}

impl Common {
    fn resolve(&self) -> depthforge::Result<RunConfig> {
        let mut kv = match &self.config {
            Some(path) => KeyValues::parse(&std::fs::read_to_string(path)?)?,
            None => KeyValues::default(),
        };
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("--set {pair:?}: expected KEY=VALUE")))?;
            kv.set(k.trim(), v.trim());
        }
        if let Some(v) = self.eps {
            kv.set("eps", v);
        }
        if let Some(v) = self.n_samples {
            kv.set("n_samples", v);
        }
        if let Some(v) = self.iterations {
            kv.set("iterations", v);
        }
        if let Some(v) = &self.seeds {
            kv.set("seeds", v);
        }
        if let Some(v) = &self.out {
            kv.set("out_dir", v.display());
        }
        RunConfig::from_key_values(&kv)
    }
}

fn configure_threads() -> depthforge::Result<()> {
    let Ok(raw) = std::env::var("DEPTHFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("DEPTHFORGE_THREADS={raw:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

fn run(cli: Cli) -> depthforge::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth { dims, common } => {
            let mut common = common;
            if let Some(d) = dims {
                let (h, w) = d
                    .split_once('x')
                    .ok_or_else(|| Error::InvalidConfig(format!("--dims {d:?}: expected HxW")))?;
                common.set.push(format!("height={h}"));
                common.set.push(format!("width={w}"));
            }
            commands::synth(&common.resolve()?)
        }
        Command::Corrupt {
            depth,
            mode,
            noise_ratio,
            sigma,
            sparse_count,
            h2i,
            coverage,
            seed,
            common,
        } => {
            let cfg = common.resolve()?;
            let spec = commands::corruption_spec(
                &cfg,
                &mode,
                noise_ratio,
                sigma,
                sparse_count,
                &h2i,
                coverage,
                seed,
            )?;
            commands::corrupt(&cfg, &depth, &spec)
        }
        Command::Estimate {
            rgb,
            depth,
            seed,
            common,
        } => commands::estimate(&common.resolve()?, &rgb, &depth, seed),
        Command::Refine {
            rgb,
            depth,
            mu,
            sigma2,
            common,
        } => commands::refine_stage(&common.resolve()?, &rgb, &depth, &mu, &sigma2),
        Command::Pipeline {
            rgb,
            depth,
            seed,
            mode,
            common,
        } => commands::pipeline(&common.resolve()?, &rgb, &depth, seed, mode == Mode::DiffOnly),
        Command::Eval {
            pred,
            truth,
            mask,
            error_map,
            error_range,
            common,
        } => commands::eval(
            &common.resolve()?,
            &pred,
            &truth,
            mask.as_deref(),
            error_map.as_deref(),
            error_range.as_deref(),
        ),
        Command::Experiment { protocol, common } => {
            let protocol = protocol.parse()?;
            commands::experiment(&common.resolve()?, protocol)
        }
        Command::Sweep {
            axis,
            noise_ratio,
            common,
        } => {
            let cfg = common.resolve()?;
            match axis {
                Axis::NSamples => commands::sweep_n_samples(&cfg, noise_ratio),
                Axis::Epsilon => commands::sweep_epsilon(&cfg, noise_ratio),
                Axis::Sigma2Ablation => commands::sweep_ablation(&cfg, noise_ratio),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("depthforge: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
