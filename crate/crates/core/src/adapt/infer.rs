//! Test-time adaptation on a single noisy image.

use std::time::Instant;

use super::{
    check_channels, denoise, denoise_frozen, train_step, AdaptConfig, AdaptOutcome, AdaptReport,
    FrozenDenoiser, RoundRecord,
};
use crate::error::Result;
use crate::image::{clip01, psnr, ImageBuffer};
use crate::nn::{interpolate, AdamState, NetworkParams};
use crate::noise::add_gaussian_noise;
use crate::resize::resize_bilinear;
use crate::rng::Rng;

/// The self-supervised pair used in one adaptation round.
#[derive(Debug)]
pub struct TrainingPair<'a> {
    pub round: usize,
    pub scale: f64,
    /// `Z = Ybar_s + r`.
    pub input: &'a ImageBuffer,
    /// `Ybar_s`, the resized output of the frozen denoiser.
    pub target: &'a ImageBuffer,
}

/// Adapts `theta_init` to `y` and returns `clip01(f(y; theta_N))`.
///
/// `Ybar = g(y)` is computed once. Each round draws a scale `s`, resizes
/// `Ybar` by `s`, draws `sigma_r` (random when blind, the known level when
/// not), forms `Z = Ybar_s + r`, runs `inner_steps` Adam steps on
/// `loss(f(Z), Ybar_s)` and interpolates toward the result with `epsilon`.
/// The Adam state lives for the whole session.
pub fn adapt_denoise(
    y: &ImageBuffer,
    theta_init: &NetworkParams,
    g: &FrozenDenoiser,
    cfg: &AdaptConfig,
    rng: &Rng,
    ground_truth: Option<&ImageBuffer>,
) -> Result<AdaptOutcome> {
    adapt_denoise_observed(y, theta_init, g, cfg, rng, ground_truth, |_| {})
}

/// [`adapt_denoise`] with a callback that sees every training pair.
pub fn adapt_denoise_observed(
    y: &ImageBuffer,
    theta_init: &NetworkParams,
    g: &FrozenDenoiser,
    cfg: &AdaptConfig,
    rng: &Rng,
    ground_truth: Option<&ImageBuffer>,
    mut observe: impl FnMut(&TrainingPair<'_>),
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    check_channels(theta_init, y.channels())?;
    check_channels(g.params(), y.channels())?;
    let truth = match ground_truth {
        Some(gt) => {
            gt.ensure_same_dims(y)?;
            Some(clip01(gt))
        }
        None => None,
    };
    let score = |theta: &NetworkParams| -> Result<Option<f64>> {
        match &truth {
            Some(gt) => Ok(Some(psnr(gt, &denoise(theta, y)?)?)),
            None => Ok(None),
        }
    };

    let mut report = AdaptReport {
        initial_psnr_db: score(theta_init)?,
        rounds: Vec::with_capacity(cfg.rounds),
    };
    let mut theta = theta_init.clone();
    if cfg.rounds > 0 {
        let ybar = denoise_frozen(g, y)?;
        let mut scale_rng = rng.stream("adapt-scale");
        let mut sigma_rng = rng.stream("adapt-sigma");
        let mut noise_rng = rng.stream("adapt-renoise");
        let spec = cfg.mode.noise_spec();
        let mut adam = AdamState::new(&theta, cfg.adam);
        for round in 1..=cfg.rounds {
            let started = Instant::now();
            let scale = cfg.scale.sample(&mut scale_rng);
            let target = resize_bilinear(&ybar, scale)?;
            let sigma_r = spec.draw_sigma(&mut sigma_rng);
            let (z, _) = add_gaussian_noise(&target, &crate::noise::NoiseSpec::fixed(sigma_r), &mut noise_rng)?;
            observe(&TrainingPair {
                round,
                scale,
                input: &z,
                target: &target,
            });
            let (zt, tt) = (z.to_tensor(), target.to_tensor());
            let mut inner = theta.clone();
            let mut loss_sum = 0.0;
            for _ in 0..cfg.inner_steps {
                loss_sum += train_step(&mut inner, &mut adam, &zt, &tt, cfg.loss)?;
            }
            theta = interpolate(&theta, &inner, cfg.epsilon)?;
            let psnr_db = score(&theta)?;
            report.rounds.push(RoundRecord {
                round,
                sigma_r,
                scale,
                loss: loss_sum / cfg.inner_steps as f64,
                psnr_db,
                wall_ms: if cfg.record_timing {
                    started.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
            });
        }
    }
    Ok(AdaptOutcome {
        denoised: denoise(&theta, y)?,
        params: theta,
        report,
    })
}

/// Naive fine-tuning: the same procedure started from the plainly
/// pre-trained parameters.
pub fn finetune_baseline(
    y: &ImageBuffer,
    theta0: &NetworkParams,
    g: &FrozenDenoiser,
    cfg: &AdaptConfig,
    rng: &Rng,
    ground_truth: Option<&ImageBuffer>,
) -> Result<AdaptOutcome> {
    adapt_denoise(y, theta0, g, cfg, rng, ground_truth)
}
