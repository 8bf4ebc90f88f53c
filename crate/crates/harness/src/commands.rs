//! The work behind each subcommand, callable without the argument parser.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mdn_core::adapt::{adapt_denoise, meta_train_reptile, pretrain_noise2truth, AdaptConfig, AdaptMode, FrozenDenoiser};
use mdn_core::image::clip01;
use mdn_core::imageio::{read_image, write_image};
use mdn_core::noise::{add_gaussian_noise, NoiseSpec};
use mdn_core::{NetworkParams, Rng};

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::dataset;
use crate::error::{HarnessError, Result};
use crate::experiments::{self, report_rows, Experiment, RunContext};
use crate::metrics::{CsvSink, MetricsRow, METRICS_HEADER};

fn wall(started: Instant, deterministic: bool) -> Option<f64> {
    Some(if deterministic {
        0.0
    } else {
        started.elapsed().as_secs_f64() * 1e3
    })
}

/// Supervised pre-training. Writes the checkpoint and a loss curve.
pub fn pretrain(cfg: &ExperimentConfig, out: &Path, metrics: &Path, deterministic: bool) -> Result<NetworkParams> {
    let corpus = dataset::train_set(cfg)?;
    eprintln!("pretrain: {} images, {}, {} steps", corpus.len(), cfg.arch, cfg.pretrain.steps);
    let root = Rng::new(cfg.seed);
    let init = NetworkParams::init(cfg.arch, &mut root.stream("init"))?;
    let started = Instant::now();
    let (theta0, curve) = pretrain_noise2truth(init, &corpus, &cfg.pretrain, &root.stream("pretrain"))?;
    let mut sink = CsvSink::create(metrics, &METRICS_HEADER)?;
    for rec in &curve {
        sink.metrics(&MetricsRow {
            loss: Some(rec.loss),
            ..MetricsRow::new("pretrain", rec.step)
        })?;
    }
    sink.metrics(&MetricsRow {
        wall_ms: wall(started, deterministic),
        loss: curve.last().map(|r| r.loss),
        ..MetricsRow::new("pretrain-total", cfg.pretrain.steps)
    })?;
    sink.finish()?;
    if let Some(last) = curve.last() {
        eprintln!("pretrain: final loss {:.6e}", last.loss);
    }
    save_checkpoint(out, &theta0)?;
    Ok(theta0)
}

fn save_checkpoint(path: &Path, params: &NetworkParams) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        experiments::ensure_dir(dir)?;
    }
    checkpoint::save(path, params)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Reptile meta-training from `theta0`, with `g` frozen at `theta0`.
///
/// Evaluation rows (`phase = meta-eval`) are emitted at `t = 0`, every
/// `meta.eval_every` steps and at `t = T`, one per evaluation image: the
/// PSNR after `meta.eval_rounds` adaptation rounds from `theta_t`.
pub fn meta_train(
    cfg: &ExperimentConfig,
    theta0_path: &Path,
    out: &Path,
    metrics: &Path,
    deterministic: bool,
) -> Result<NetworkParams> {
    let theta0 = checkpoint::load(theta0_path)?;
    if theta0.arch() != cfg.arch {
        eprintln!("meta-train: using checkpoint arch {} (config says {})", theta0.arch(), cfg.arch);
    }
    let g = FrozenDenoiser::new(theta0.clone());
    let corpus = dataset::train_set(cfg)?;
    let sigma = cfg.data.eval_sigma255;
    let eval = dataset::eval_set(cfg, sigma)?;
    let acfg = AdaptConfig {
        rounds: cfg.meta_eval.rounds,
        record_timing: false,
        ..cfg.adapt.clone()
    };
    let root = Rng::new(cfg.seed);
    let eval_rng = root.stream("meta-eval");
    let total = cfg.meta.outer_steps;
    let every = cfg.meta_eval.every;
    let mut sink = CsvSink::create(metrics, &METRICS_HEADER)?;
    let mut last = Instant::now();
    eprintln!("meta-train: T={total}, K={}, eps={}", cfg.meta.inner_steps, cfg.meta.epsilon);
    let theta_t = meta_train_reptile(&theta0, &g, &corpus, &cfg.meta, &root.stream("meta"), |p| {
        let csv_err = |e: HarnessError| mdn_core::Error::Data(e.to_string());
        if p.t > 0 {
            sink.metrics(&MetricsRow {
                loss: Some(p.inner_loss),
                wall_ms: wall(last, deterministic),
                ..MetricsRow::new("meta", p.t)
            })
            .map_err(csv_err)?;
            last = Instant::now();
        }
        let due = p.t == 0 || p.t == total || (every > 0 && p.t % every == 0);
        if due {
            let scores = mdn_core::exec::map_range(eval.len(), |i| {
                let img = &eval[i];
                adapt_denoise(&img.noisy, p.params, &g, &acfg, &eval_rng.fork(i as u64), Some(&img.clean))
                    .map(|o| o.report.final_psnr_db().expect("ground truth"))
            });
            let mut sum = 0.0;
            for (img, s) in eval.iter().zip(scores) {
                let s = s?;
                sum += s;
                sink.metrics(&MetricsRow {
                    image_id: Some(img.id.clone()),
                    sigma_n: Some(sigma),
                    psnr_db: Some(s),
                    ..MetricsRow::new("meta-eval", p.t)
                })
                .map_err(csv_err)?;
            }
            eprintln!("meta-train t={}: mean eval PSNR {:.3} dB", p.t, sum / eval.len().max(1) as f64);
        }
        Ok(())
    })?;
    sink.finish()?;
    save_checkpoint(out, &theta_t)?;
    Ok(theta_t)
}

/// How the re-noising level is chosen for `denoise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFlag {
    /// Use the configured mode.
    Config,
    Blind,
    Sigma(f64),
}

#[derive(Debug, Clone)]
pub struct DenoiseJob {
    pub theta: PathBuf,
    /// Frozen denoiser; defaults to `theta`.
    pub g: Option<PathBuf>,
    pub input: PathBuf,
    pub output: PathBuf,
    pub noise: NoiseFlag,
    pub iters: Option<usize>,
    pub report: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seed: u64,
    pub deterministic: bool,
}

/// Adapts to one noisy image and writes the restored image.
pub fn denoise(job: &DenoiseJob, base: &AdaptConfig) -> Result<()> {
    let y = read_image(&job.input)?;
    let theta = checkpoint::load(&job.theta)?;
    let g = match &job.g {
        Some(p) => checkpoint::load(p)?,
        None => theta.clone(),
    };
    let gt = job.ground_truth.as_deref().map(read_image).transpose()?;
    let mut cfg = AdaptConfig {
        record_timing: !job.deterministic,
        ..base.clone()
    };
    if let Some(n) = job.iters {
        cfg.rounds = n;
    }
    cfg.mode = match job.noise {
        NoiseFlag::Config => cfg.mode,
        NoiseFlag::Blind => match cfg.mode {
            AdaptMode::Blind { .. } => cfg.mode,
            AdaptMode::NonBlind { .. } => AdaptMode::Blind { sigma_max255: 50.0 },
        },
        NoiseFlag::Sigma(s) => AdaptMode::NonBlind { sigma255: s },
    };
    let rng = Rng::new(job.seed).stream("denoise");
    eprintln!("denoise: {} rounds, {:?}", cfg.rounds, cfg.mode);
    let out = adapt_denoise(&y, &theta, &FrozenDenoiser::new(g), &cfg, &rng, gt.as_ref())?;
    write_image(&job.output, &out.denoised)?;
    if let Some(path) = &job.report {
        let id = job
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let sigma_n = match cfg.mode {
            AdaptMode::NonBlind { sigma255 } => Some(sigma255),
            AdaptMode::Blind { .. } => None,
        };
        let mut sink = CsvSink::create(path, &METRICS_HEADER)?;
        for row in report_rows("adapt", &id, sigma_n, &out.report) {
            sink.metrics(&row)?;
        }
        sink.finish()?;
    }
    if let Some(p) = out.report.final_psnr_db() {
        eprintln!("denoise: PSNR {p:.3} dB");
    }
    Ok(())
}

/// Adds Gaussian noise to an image; the saved file is clipped and quantized.
pub fn corrupt(input: &Path, output: &Path, sigma255: f64, seed: u64) -> Result<()> {
    let x = read_image(input)?;
    let (y, _) = add_gaussian_noise(&x, &NoiseSpec::fixed(sigma255), &mut Rng::new(seed).stream("corrupt"))?;
    write_image(output, &clip01(&y))?;
    Ok(())
}

pub fn experiment(which: Experiment, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    experiments::ensure_dir(&ctx.out_dir)?;
    eprintln!("experiment {} -> {}", which.name(), ctx.out_dir.display());
    match which {
        Experiment::AdaptGain => {
            let s = experiments::adapt_gain(cfg, ctx)?;
            eprintln!(
                "adapt-gain: {:.3} -> {:.3} dB (gain {:+.3})",
                s.mean_before(),
                s.mean_after(),
                s.mean_gain()
            );
        }
        Experiment::ScaleAblation => {
            experiments::scale_ablation(cfg, ctx)?;
        }
        Experiment::PatchSize => {
            experiments::patch_size(cfg, ctx)?;
        }
        Experiment::MetaVsFinetune => {
            let s = experiments::meta_vs_finetune(cfg, ctx)?;
            let (a, b) = s.wins();
            eprintln!(
                "meta-vs-finetune: mean difference {:+.4} dB, meta wins {a}, finetune wins {b}, p = {:.4}",
                s.mean_difference(),
                s.p_value()
            );
        }
        Experiment::Table1Blindspot => {
            let s = experiments::table1_blindspot(cfg, ctx)?;
            let (p, b, t) = s.means();
            eprintln!("table1-blindspot: pretrained {p:.3}, blind-spot {b:.3}, two-phase {t:.3} dB");
        }
        Experiment::EstimatorLab => {
            experiments::estimator_lab(cfg, ctx)?;
        }
    }
    Ok(())
}
