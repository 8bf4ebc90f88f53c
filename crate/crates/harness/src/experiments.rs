//! Experiment drivers. Each writes CSV files under an output directory and
//! returns a summary for programmatic checks.

use std::path::{Path, PathBuf};

use mdn_core::adapt::{
    adapt_denoise, blindspot_adapt, denoise, finetune_baseline, AdaptConfig, AdaptReport,
    BlindSpotConfig, FrozenDenoiser,
};
use mdn_core::corpus::TextureConfig;
use mdn_core::image::{psnr, ImageBuffer};
use mdn_core::imageio::to_bytes;
use mdn_core::lab::{
    blindspot_sample_ceiling, inner_mean_convergence, loglog_slope, mc_loss_decomposition,
    variance_reduction_check, CeilingReport, ConvergencePoint, Decomposition, PatchEnsemble,
    Recurrence, VarianceRow,
};
use mdn_core::noise::ScalePolicy;
use mdn_core::patches::central_crop;
use mdn_core::{exec, NetworkParams, Rng};

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::dataset::{self, EvalImage};
use crate::error::{HarnessError, Result};
use crate::metrics::{CsvSink, MetricsRow, LAB_HEADER, METRICS_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AdaptGain,
    ScaleAblation,
    PatchSize,
    MetaVsFinetune,
    Table1Blindspot,
    EstimatorLab,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::AdaptGain,
        Experiment::ScaleAblation,
        Experiment::PatchSize,
        Experiment::MetaVsFinetune,
        Experiment::Table1Blindspot,
        Experiment::EstimatorLab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::AdaptGain => "adapt-gain",
            Experiment::ScaleAblation => "scale-ablation",
            Experiment::PatchSize => "patch-size",
            Experiment::MetaVsFinetune => "meta-vs-finetune",
            Experiment::Table1Blindspot => "table1-blindspot",
            Experiment::EstimatorLab => "estimator-lab",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::usage(format!("unknown experiment {s:?}")))
    }
}

/// Shared run settings.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    /// Zero all wall-clock fields so outputs are byte-reproducible.
    pub deterministic: bool,
}

impl RunContext {
    fn csv(&self, name: &str, header: &[&str]) -> Result<CsvSink<std::fs::File>> {
        CsvSink::create(&self.out_dir.join(name), header)
    }

    fn adapt(&self, cfg: &AdaptConfig) -> AdaptConfig {
        AdaptConfig {
            record_timing: !self.deterministic,
            ..cfg.clone()
        }
    }
}

fn need_checkpoint(path: &Option<PathBuf>, what: &str) -> Result<NetworkParams> {
    let path = path
        .as_ref()
        .ok_or_else(|| HarnessError::data(format!("no {what} checkpoint configured (paths.{what})")))?;
    if !path.exists() {
        return Err(HarnessError::data(format!("missing checkpoint {}", path.display())));
    }
    checkpoint::load(path)
}

/// Per-round rows for one report, starting with the `iter = 0` state.
pub fn report_rows(phase: &str, image_id: &str, sigma_n: Option<f64>, report: &AdaptReport) -> Vec<MetricsRow> {
    let mut rows = vec![MetricsRow {
        image_id: Some(image_id.to_string()),
        sigma_n,
        psnr_db: report.initial_psnr_db,
        ..MetricsRow::new(phase, 0)
    }];
    rows.extend(report.rounds.iter().map(|r| MetricsRow {
        image_id: Some(image_id.to_string()),
        sigma_n,
        sigma_r: Some(r.sigma_r),
        scale: Some(r.scale),
        loss: Some(r.loss),
        psnr_db: r.psnr_db,
        wall_ms: Some(r.wall_ms),
        ..MetricsRow::new(phase, r.round)
    }));
    rows
}

fn per_image<T: Send>(images: &[EvalImage], f: impl Fn(usize, &EvalImage) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    exec::map_range(images.len(), |i| f(i, &images[i])).into_iter().collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn final_psnr(report: &AdaptReport) -> f64 {
    report.final_psnr_db().expect("ground truth was supplied")
}

/// PSNR before and after adaptation for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub id: String,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptGainSummary {
    pub sigma255: f64,
    pub rounds: usize,
    pub images: Vec<ImageScore>,
}

impl AdaptGainSummary {
    pub fn mean_before(&self) -> f64 {
        mean(&self.images.iter().map(|s| s.before).collect::<Vec<_>>())
    }

    pub fn mean_after(&self) -> f64 {
        mean(&self.images.iter().map(|s| s.after).collect::<Vec<_>>())
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_after() - self.mean_before()
    }
}

/// Adapts the pre-trained network on every evaluation image and compares
/// the result with the unadapted output.
pub fn adapt_gain(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<AdaptGainSummary> {
    let theta0 = need_checkpoint(&cfg.paths.theta0, "theta0")?;
    let g = FrozenDenoiser::new(theta0.clone());
    let sigma = cfg.data.eval_sigma255;
    let images = dataset::eval_set(cfg, sigma)?;
    let acfg = ctx.adapt(&cfg.adapt);
    let rng = Rng::new(cfg.seed).stream("adapt-gain");
    let reports = per_image(&images, |i, img| {
        let out = adapt_denoise(&img.noisy, &theta0, &g, &acfg, &rng.fork(i as u64), Some(&img.clean))?;
        eprintln!(
            "adapt-gain {}: {:.3} -> {:.3} dB",
            img.id,
            out.report.initial_psnr_db.unwrap_or(f64::NAN),
            final_psnr(&out.report)
        );
        Ok(out.report)
    })?;
    let mut sink = ctx.csv("adapt_gain.csv", &METRICS_HEADER)?;
    let mut scores = Vec::new();
    for (img, rep) in images.iter().zip(&reports) {
        for row in report_rows("adapt", &img.id, Some(sigma), rep) {
            sink.metrics(&row)?;
        }
        scores.push(ImageScore {
            id: img.id.clone(),
            before: rep.initial_psnr_db.expect("ground truth"),
            after: final_psnr(rep),
        });
    }
    sink.finish()?;
    Ok(AdaptGainSummary {
        sigma255: sigma,
        rounds: acfg.rounds,
        images: scores,
    })
}

/// Mean final PSNR for each fixed adaptation scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleAblationSummary {
    pub initial_mean: f64,
    pub per_scale: Vec<(f64, f64)>,
}

pub fn scale_ablation(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ScaleAblationSummary> {
    let theta0 = need_checkpoint(&cfg.paths.theta0, "theta0")?;
    let g = FrozenDenoiser::new(theta0.clone());
    let sigma = cfg.data.eval_sigma255;
    let images = dataset::eval_set(cfg, sigma)?;
    let rng = Rng::new(cfg.seed).stream("scale-ablation");
    let mut sink = ctx.csv("scale_ablation.csv", &METRICS_HEADER)?;
    let mut per_scale = Vec::new();
    let mut initial_mean = f64::NAN;
    for &s in &cfg.experiment.scales {
        let acfg = AdaptConfig {
            scale: ScalePolicy::Fixed(s),
            ..ctx.adapt(&cfg.adapt)
        };
        let reports = per_image(&images, |i, img| {
            Ok(adapt_denoise(&img.noisy, &theta0, &g, &acfg, &rng.fork(i as u64), Some(&img.clean))?.report)
        })?;
        for (img, rep) in images.iter().zip(&reports) {
            for row in report_rows(&format!("scale-{s}"), &img.id, Some(sigma), rep) {
                sink.metrics(&row)?;
            }
        }
        initial_mean = mean(&reports.iter().map(|r| r.initial_psnr_db.expect("gt")).collect::<Vec<_>>());
        let m = mean(&reports.iter().map(final_psnr).collect::<Vec<_>>());
        eprintln!("scale-ablation s={s}: mean {m:.3} dB (unadapted {initial_mean:.3})");
        per_scale.push((s, m));
    }
    sink.finish()?;
    Ok(ScaleAblationSummary { initial_mean, per_scale })
}

/// Mean PSNR on the central region for each adaptation patch size.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSizeSummary {
    pub unadapted_mean: f64,
    pub per_size: Vec<(usize, f64)>,
}

/// Adapts on central crops of increasing size and scores every result on
/// the same central region, so all sizes are compared on equal pixels.
pub fn patch_size(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<PatchSizeSummary> {
    let theta0 = need_checkpoint(&cfg.paths.theta0, "theta0")?;
    let g = FrozenDenoiser::new(theta0.clone());
    let knobs = &cfg.experiment;
    let sigma = cfg.data.eval_sigma255;
    let clean = match &cfg.data.eval_dir {
        Some(dir) => dataset::load_dir(dir, cfg.arch.channels)?
            .into_iter()
            .map(|mut n| {
                n.image = central_crop(&n.image, knobs.patch_image)?;
                Ok(n)
            })
            .collect::<Result<Vec<_>>>()?,
        None => {
            let tex = TextureConfig {
                height: knobs.patch_image,
                width: knobs.patch_image,
                channels: cfg.arch.channels,
                ..cfg.data.toy
            };
            dataset::toy(cfg.data.toy_eval, &tex, &Rng::new(cfg.seed).stream("toy-patch"), "patch")?
        }
    };
    let images = dataset::corrupt_all(clean, sigma, &Rng::new(cfg.seed).stream("patch-noise"))?;
    let rng = Rng::new(cfg.seed).stream("patch-size");
    let acfg = ctx.adapt(&cfg.adapt);
    let measure = knobs.patch_measure;
    let score = |clean: &ImageBuffer, out: &ImageBuffer| -> Result<f64> {
        Ok(psnr(&central_crop(clean, measure)?, &central_crop(out, measure)?)?)
    };
    let unadapted = per_image(&images, |_, img| score(&img.clean, &denoise(&theta0, &img.noisy)?))?;
    let mut sink = ctx.csv("patch_size.csv", &METRICS_HEADER)?;
    for (img, p) in images.iter().zip(&unadapted) {
        sink.metrics(&MetricsRow {
            image_id: Some(img.id.clone()),
            sigma_n: Some(sigma),
            psnr_db: Some(*p),
            ..MetricsRow::new("unadapted", 0)
        })?;
    }
    let mut per_size = Vec::new();
    for &p in &knobs.patch_sizes {
        let scores = per_image(&images, |i, img| {
            let y = central_crop(&img.noisy, p)?;
            let out = adapt_denoise(&y, &theta0, &g, &acfg, &rng.fork(i as u64), None)?;
            score(&img.clean, &embed_center(&out.denoised, img.noisy.dims())?)
        })?;
        for (img, s) in images.iter().zip(&scores) {
            sink.metrics(&MetricsRow {
                image_id: Some(img.id.clone()),
                sigma_n: Some(sigma),
                psnr_db: Some(*s),
                ..MetricsRow::new(format!("patch-{p}"), acfg.rounds)
            })?;
        }
        let m = mean(&scores);
        eprintln!("patch-size {p}: mean {m:.3} dB on the central {measure}x{measure}");
        per_size.push((p, m));
    }
    sink.finish()?;
    Ok(PatchSizeSummary {
        unadapted_mean: mean(&unadapted),
        per_size,
    })
}

/// Places `inner` at the centre of a zero canvas of `dims`, matching
/// [`central_crop`]'s offsets.
fn embed_center(inner: &ImageBuffer, dims: (usize, usize, usize)) -> Result<ImageBuffer> {
    let (h, w, c) = dims;
    let (ih, iw, _) = inner.dims();
    let (top, left) = ((h - ih) / 2, (w - iw) / 2);
    let mut data = vec![0.0f32; h * w * c];
    for ch in 0..c {
        for y in 0..ih {
            for x in 0..iw {
                data[(ch * h + top + y) * w + left + x] = inner.get(ch, y, x);
            }
        }
    }
    Ok(ImageBuffer::new(h, w, c, data)?)
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `n` fair coin flips.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    let mut binom = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            p += binom;
        }
    }
    p / 2f64.powi(n as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaVsFinetuneSummary {
    pub sigma255: f64,
    pub rounds: usize,
    pub ids: Vec<String>,
    pub pretrained: Vec<f64>,
    pub finetune: Vec<f64>,
    pub meta: Vec<f64>,
}

impl MetaVsFinetuneSummary {
    pub fn mean_difference(&self) -> f64 {
        mean(&self.meta) - mean(&self.finetune)
    }

    /// (meta better, finetune better); ties count for neither.
    pub fn wins(&self) -> (usize, usize) {
        let mut w = (0, 0);
        for (m, f) in self.meta.iter().zip(&self.finetune) {
            if m > f {
                w.0 += 1;
            } else if f > m {
                w.1 += 1;
            }
        }
        w
    }

    /// One-sided sign-test p-value for "meta beats finetune".
    pub fn p_value(&self) -> f64 {
        let (a, b) = self.wins();
        sign_test_p(a, a + b)
    }
}

/// Same adaptation, same noise draws, two starting points: the
/// meta-trained and the plainly pre-trained parameters.
pub fn meta_vs_finetune(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<MetaVsFinetuneSummary> {
    let theta0 = need_checkpoint(&cfg.paths.theta0, "theta0")?;
    let theta_meta = need_checkpoint(&cfg.paths.theta_meta, "theta_meta")?;
    theta0.ensure_same_arch(&theta_meta)?;
    let g = FrozenDenoiser::new(theta0.clone());
    let sigma = cfg.experiment.compare_sigma255;
    let images = dataset::eval_set(cfg, sigma)?;
    let acfg = AdaptConfig {
        rounds: cfg.experiment.compare_rounds,
        ..ctx.adapt(&cfg.adapt)
    };
    let rng = Rng::new(cfg.seed).stream("meta-vs-finetune");
    let pairs = per_image(&images, |i, img| {
        let r = rng.fork(i as u64);
        let ft = finetune_baseline(&img.noisy, &theta0, &g, &acfg, &r, Some(&img.clean))?.report;
        let meta = adapt_denoise(&img.noisy, &theta_meta, &g, &acfg, &r, Some(&img.clean))?.report;
        eprintln!(
            "meta-vs-finetune {}: pretrained {:.3}, finetune {:.3}, meta {:.3} dB",
            img.id,
            ft.initial_psnr_db.unwrap_or(f64::NAN),
            final_psnr(&ft),
            final_psnr(&meta)
        );
        Ok((ft, meta))
    })?;
    let mut sink = ctx.csv("meta_vs_finetune.csv", &METRICS_HEADER)?;
    let mut summary = MetaVsFinetuneSummary {
        sigma255: sigma,
        rounds: acfg.rounds,
        ids: Vec::new(),
        pretrained: Vec::new(),
        finetune: Vec::new(),
        meta: Vec::new(),
    };
    for (img, (ft, meta)) in images.iter().zip(&pairs) {
        for row in report_rows("finetune", &img.id, Some(sigma), ft)
            .into_iter()
            .chain(report_rows("meta", &img.id, Some(sigma), meta))
        {
            sink.metrics(&row)?;
        }
        summary.ids.push(img.id.clone());
        summary.pretrained.push(ft.initial_psnr_db.expect("gt"));
        summary.finetune.push(final_psnr(ft));
        summary.meta.push(final_psnr(meta));
    }
    sink.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindSpotSummary {
    pub sigma255: f64,
    pub pretrained: Vec<f64>,
    pub blindspot: Vec<f64>,
    pub two_phase: Vec<f64>,
}

impl BlindSpotSummary {
    pub fn means(&self) -> (f64, f64, f64) {
        (mean(&self.pretrained), mean(&self.blindspot), mean(&self.two_phase))
    }
}

/// Blind-spot adaptation versus two-phase adaptation, both from the
/// pre-trained parameters.
pub fn table1_blindspot(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<BlindSpotSummary> {
    let theta0 = need_checkpoint(&cfg.paths.theta0, "theta0")?;
    let g = FrozenDenoiser::new(theta0.clone());
    let sigma = cfg.experiment.compare_sigma255;
    let images = dataset::eval_set(cfg, sigma)?;
    let acfg = ctx.adapt(&cfg.adapt);
    let bcfg = BlindSpotConfig {
        record_timing: !ctx.deterministic,
        ..cfg.blindspot.clone()
    };
    let rng = Rng::new(cfg.seed).stream("table1-blindspot");
    let reports = per_image(&images, |i, img| {
        let r = rng.fork(i as u64);
        let (_, _, bs) = blindspot_adapt(&img.noisy, &theta0, &bcfg, &r, Some(&img.clean))?;
        let tp = adapt_denoise(&img.noisy, &theta0, &g, &acfg, &r, Some(&img.clean))?.report;
        eprintln!(
            "table1-blindspot {}: pretrained {:.3}, blind-spot {:.3}, two-phase {:.3} dB",
            img.id,
            tp.initial_psnr_db.unwrap_or(f64::NAN),
            final_psnr(&bs),
            final_psnr(&tp)
        );
        Ok((bs, tp))
    })?;
    let mut sink = ctx.csv("table1_blindspot.csv", &METRICS_HEADER)?;
    let mut summary = BlindSpotSummary {
        sigma255: sigma,
        pretrained: Vec::new(),
        blindspot: Vec::new(),
        two_phase: Vec::new(),
    };
    for (img, (bs, tp)) in images.iter().zip(&reports) {
        let bs_rows = report_rows("blindspot", &img.id, Some(sigma), bs)
            .into_iter()
            .map(|mut r| {
                // the blind-spot loss has no re-noising
                r.sigma_r = None;
                r.scale = None;
                r
            });
        for row in bs_rows.chain(report_rows("two-phase", &img.id, Some(sigma), tp)) {
            sink.metrics(&row)?;
        }
        summary.pretrained.push(tp.initial_psnr_db.expect("gt"));
        summary.blindspot.push(final_psnr(bs));
        summary.two_phase.push(final_psnr(tp));
    }
    sink.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabSummary {
    pub decomposition: Vec<(String, Decomposition)>,
    pub convergence: Vec<ConvergencePoint>,
    pub convergence_slope: f64,
    pub variance: Vec<VarianceRow>,
    pub ceiling: Vec<(String, CeilingReport)>,
}

/// Runs the Monte-Carlo checks and writes `estimator_lab.csv` (the
/// variance table) plus `decomposition.csv`, `convergence.csv` and
/// `ceiling.csv`.
pub fn estimator_lab(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<LabSummary> {
    let lab = &cfg.lab;
    let rng = Rng::new(cfg.seed).stream("estimator-lab");
    let mut patch_rng = rng.stream("patch");
    let clean: Vec<f64> = (0..lab.variance.patch_len).map(|_| patch_rng.uniform_range(0.2, 0.8)).collect();
    let sigma_n = lab.variance.sigma_n255;

    let identity = |y: &[f64]| y.to_vec();
    let oracle = {
        let c = clean.clone();
        move |_: &[f64]| c.clone()
    };
    let mut decomposition = Vec::new();
    let mut sink = ctx.csv(
        "decomposition.csv",
        &["f", "sigma_n", "trials", "lhs", "term1", "term2", "relative_gap"],
    )?;
    for (name, f) in [("identity", &identity as &(dyn Fn(&[f64]) -> Vec<f64> + Sync)), ("clean-oracle", &oracle)] {
        let d = mc_loss_decomposition(f, &clean, sigma_n, lab.decomposition_trials, &rng.stream(name))?;
        eprintln!("decomposition f={name}: lhs {:.6e}, terms {:.6e} + {:.6e}, gap {:.3}%", d.lhs, d.term1, d.term2, 100.0 * d.relative_gap());
        sink.record([
            name.to_string(),
            sigma_n.to_string(),
            lab.decomposition_trials.to_string(),
            d.lhs.to_string(),
            d.term1.to_string(),
            d.term2.to_string(),
            d.relative_gap().to_string(),
        ])?;
        decomposition.push((name.to_string(), d));
    }
    sink.finish()?;

    let ens = PatchEnsemble {
        clean: clean.clone(),
        m: lab.convergence_m,
        sigma_n255: sigma_n,
        sigma_r255: lab.variance.sigma_r255,
        recurrence: Recurrence::Exact,
    };
    let convergence = inner_mean_convergence(&ens, &identity, &lab.convergence_n, lab.convergence_trials, &rng.stream("convergence"))?;
    let convergence_slope = loglog_slope(&convergence);
    let mut sink = ctx.csv("convergence.csv", &["M", "N", "sigma_r", "error", "predicted"])?;
    for p in &convergence {
        sink.record([
            lab.convergence_m.to_string(),
            p.n.to_string(),
            lab.variance.sigma_r255.to_string(),
            p.error.to_string(),
            p.predicted.to_string(),
        ])?;
    }
    sink.finish()?;
    eprintln!("inner-mean convergence slope {convergence_slope:.4}");

    let variance = variance_reduction_check(&lab.variance, &rng.stream("variance"))?;
    let mut sink = ctx.csv("estimator_lab.csv", &LAB_HEADER)?;
    for row in &variance {
        eprintln!("variance M={}: empirical {:.4e}, predicted {:.4e}, ratio {:.3}", row.m, row.var_empirical, row.var_predicted, row.ratio());
        sink.lab(row)?;
    }
    sink.finish()?;

    let side = 9;
    let flat = vec![128u8; side * side];
    let textured = {
        let tex = TextureConfig {
            height: side,
            width: side,
            channels: 1,
            motif: 4,
            tile_jitter: 0.0,
        };
        to_bytes(&mdn_core::corpus::tiled_texture(&tex, &mut rng.stream("ceiling-patch"))?)
    };
    let mut ceiling = Vec::new();
    let mut sink = ctx.csv(
        "ceiling.csv",
        &["patch", "sigma_n", "sigma_residual", "neighbor_target_var", "two_phase_target_var", "distinct_neighbor_values"],
    )?;
    for (name, patch) in [("flat", &flat), ("textured", &textured)] {
        let rep = blindspot_sample_ceiling(
            patch,
            side,
            sigma_n,
            lab.variance.sigma_residual255,
            lab.variance.trials,
            &rng.stream(name),
        )?;
        sink.record([
            name.to_string(),
            sigma_n.to_string(),
            lab.variance.sigma_residual255.to_string(),
            rep.neighbor_target_var.to_string(),
            rep.two_phase_target_var.to_string(),
            rep.distinct_neighbor_values.to_string(),
        ])?;
        ceiling.push((name.to_string(), rep));
    }
    sink.finish()?;

    Ok(LabSummary {
        decomposition,
        convergence,
        convergence_slope,
        variance,
        ceiling,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(8, 10) - 56.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(7, 10) - 176.0 / 1024.0).abs() < 1e-15);
        assert_eq!(sign_test_p(0, 10), 1.0);
        assert_eq!(sign_test_p(0, 0), 1.0);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("table-1".parse::<Experiment>().is_err());
    }

    #[test]
    fn embed_center_inverts_central_crop() {
        let img = ImageBuffer::new(6, 6, 1, (0..36).map(|i| i as f32 / 36.0).collect()).unwrap();
        let inner = central_crop(&img, 4).unwrap();
        let back = embed_center(&inner, img.dims()).unwrap();
        assert_eq!(central_crop(&back, 4).unwrap(), inner);
        assert_eq!(central_crop(&back, 2).unwrap(), central_crop(&img, 2).unwrap());
    }

    #[test]
    fn missing_checkpoint_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.paths.theta0 = Some(dir.path().join("absent.mdnz"));
        let ctx = RunContext {
            out_dir: dir.path().to_path_buf(),
            deterministic: true,
        };
        let err = adapt_gain(&cfg, &ctx).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("missing checkpoint"));
        cfg.paths.theta0 = None;
        assert!(meta_vs_finetune(&cfg, &ctx).is_err());
    }
}
