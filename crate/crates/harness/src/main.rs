use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdn_core::corpus::TextureConfig;
use mdn_harness::commands::{self, DenoiseJob, NoiseFlag};
use mdn_harness::config::ExperimentConfig;
use mdn_harness::experiments::{Experiment, RunContext};
use mdn_harness::{dataset, HarnessError, Result};

/// Test-time adaptive image denoising.
#[derive(Parser)]
#[command(name = "mdn", version)]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Zero wall-clock columns so every output is byte-reproducible.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set meta.outer_steps=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised pre-training on clean images with synthetic noise.
    Pretrain {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint to write [default: paths.theta0 or <out>/theta0.mdnz].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss curve CSV [default: <out dir>/pretrain.csv].
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Reptile meta-training starting from a pre-trained checkpoint.
    MetaTrain {
        #[command(flatten)]
        config: ConfigArgs,
        /// Pre-trained checkpoint, also used as the frozen denoiser.
        #[arg(long)]
        theta0: Option<PathBuf>,
        /// Checkpoint to write [default: paths.theta_meta or <out>/theta_meta.mdnz].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration CSV [default: <out dir>/meta.csv].
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Adapt to one noisy image and write the restored image.
    Denoise {
        #[command(flatten)]
        config: ConfigArgs,
        /// Parameters to adapt.
        #[arg(long)]
        theta: PathBuf,
        /// Frozen denoiser [default: --theta].
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Unknown noise level: draw the re-noising level at random.
        #[arg(long, conflicts_with = "sigma")]
        blind: bool,
        /// Known noise level on the 0-255 scale.
        #[arg(long)]
        sigma: Option<f64>,
        /// Adaptation rounds; 0 gives the plain feed-forward output.
        #[arg(long)]
        iters: Option<usize>,
        /// Per-round CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Clean image for per-round PSNR.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Run a named experiment and write its CSV files.
    Experiment {
        /// adapt-gain, scale-ablation, patch-size, meta-vs-finetune,
        /// table1-blindspot or estimator-lab.
        name: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory [default: paths.out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded tiled-texture PNGs.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 16)]
        motif: usize,
    },
    /// Add Gaussian noise to an image.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Noise level on the 0-255 scale.
        #[arg(long)]
        sigma: f64,
    },
}

fn load_config(args: &ConfigArgs, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MDN_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::usage(format!("MDN_THREADS={v:?} is not a positive integer")))?;
        mdn_core::exec::init_threads(n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let det = cli.deterministic;
    match cli.command {
        Command::Pretrain { config, out, metrics } => {
            let cfg = load_config(&config, cli.seed)?;
            let out = out
                .or_else(|| cfg.paths.theta0.clone())
                .unwrap_or_else(|| cfg.paths.out.join("theta0.mdnz"));
            let metrics = metrics.unwrap_or_else(|| cfg.paths.out.join("pretrain.csv"));
            commands::pretrain(&cfg, &out, &metrics, det)?;
        }
        Command::MetaTrain { config, theta0, out, metrics } => {
            let cfg = load_config(&config, cli.seed)?;
            let theta0 = theta0
                .or_else(|| cfg.paths.theta0.clone())
                .ok_or_else(|| HarnessError::usage("meta-train needs --theta0 or paths.theta0"))?;
            let out = out
                .or_else(|| cfg.paths.theta_meta.clone())
                .unwrap_or_else(|| cfg.paths.out.join("theta_meta.mdnz"));
            let metrics = metrics.unwrap_or_else(|| cfg.paths.out.join("meta.csv"));
            commands::meta_train(&cfg, &theta0, &out, &metrics, det)?;
        }
        Command::Denoise {
            config,
            theta,
            g,
            input,
            output,
            blind,
            sigma,
            iters,
            report,
            ground_truth,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let noise = match (blind, sigma) {
                (true, _) => NoiseFlag::Blind,
                (false, Some(s)) => NoiseFlag::Sigma(s),
                (false, None) => NoiseFlag::Config,
            };
            let job = DenoiseJob {
                theta,
                g,
                input,
                output,
                noise,
                iters,
                report,
                ground_truth,
                seed: cfg.seed,
                deterministic: det,
            };
            commands::denoise(&job, &cfg.adapt)?;
        }
        Command::Experiment { name, config, out } => {
            let which: Experiment = name.parse()?;
            let cfg = load_config(&config, cli.seed)?;
            let ctx = RunContext {
                out_dir: out.unwrap_or_else(|| cfg.paths.out.clone()),
                deterministic: det,
            };
            commands::experiment(which, &cfg, &ctx)?;
        }
        Command::GenToy { out, count, size, motif } => {
            let tex = TextureConfig {
                height: size,
                width: size,
                motif,
                ..Default::default()
            };
            let written = dataset::write_toy(&out, count, &tex, cli.seed.unwrap_or(0))?;
            eprintln!("wrote {} images to {}", written.len(), out.display());
        }
        Command::Corrupt { input, output, sigma } => {
            commands::corrupt(&input, &output, sigma, cli.seed.unwrap_or(0))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
