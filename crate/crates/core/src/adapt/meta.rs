//! Reptile meta-training on the two-phase self-supervised loss.

use super::{
    check_channels, patch_side, sample_clean_patches, stack_images, train_step, FrozenDenoiser,
    MetaConfig,
};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::nn::{interpolate, AdamState, LossKind, NetworkParams};
use crate::noise::{add_gaussian_noise, NoiseSpec};
use crate::rng::Rng;

/// Passed to the evaluation hook at `t = 0` and after every outer iteration.
#[derive(Debug)]
pub struct MetaProgress<'a> {
    pub t: usize,
    pub params: &'a NetworkParams,
    /// Mean inner loss of iteration `t` (NaN at `t = 0`).
    pub inner_loss: f64,
}

/// Each outer iteration copies the current parameters, runs `K` inner Adam
/// steps on `||f(Z) - Ybar||^2` with fresh optimizer state, then moves the
/// meta-parameters a fraction `epsilon` toward the result.
///
/// Inner batches: clean patches `X`, `Y = X + n` with `sigma_n ~ U(0, sigma_max)`,
/// `Ybar = g(Y)`, `Z = Ybar + r` with `sigma_r ~ U(0, sigma_max)`; scale 1.
pub fn meta_train_reptile(
    theta0: &NetworkParams,
    g: &FrozenDenoiser,
    corpus: &[ImageBuffer],
    cfg: &MetaConfig,
    rng: &Rng,
    mut hook: impl FnMut(&MetaProgress<'_>) -> Result<()>,
) -> Result<NetworkParams> {
    cfg.validate()?;
    if g.params().arch().channels != theta0.arch().channels {
        return Err(Error::shape("frozen denoiser and trainable network disagree on channels"));
    }
    let side = patch_side(corpus, cfg.patch)?;
    for img in corpus {
        check_channels(theta0, img.channels())?;
    }
    let mut data_rng = rng.stream("meta-data");
    let mut noise_rng = rng.stream("meta-noise");
    let mut renoise_rng = rng.stream("meta-renoise");
    let spec = NoiseSpec::uniform(cfg.sigma_max255);

    let mut theta = theta0.clone();
    hook(&MetaProgress { t: 0, params: &theta, inner_loss: f64::NAN })?;
    for t in 1..=cfg.outer_steps {
        let mut inner = theta.clone();
        let mut adam = AdamState::new(&inner, cfg.adam);
        let mut loss_sum = 0.0;
        for _ in 0..cfg.inner_steps {
            let clean = sample_clean_patches(corpus, side, cfg.batch, false, &mut data_rng)?;
            let noisy = clean
                .iter()
                .map(|x| add_gaussian_noise(x, &spec, &mut noise_rng).map(|(y, _)| y))
                .collect::<Result<Vec<_>>>()?;
            let ybar = g.apply(&stack_images(&noisy)?)?;
            let ybar_images = (0..cfg.batch)
                .map(|i| ImageBuffer::from_tensor(&ybar, i))
                .collect::<Result<Vec<_>>>()?;
            let z = ybar_images
                .iter()
                .map(|yb| add_gaussian_noise(yb, &spec, &mut renoise_rng).map(|(z, _)| z))
                .collect::<Result<Vec<_>>>()?;
            loss_sum += train_step(&mut inner, &mut adam, &stack_images(&z)?, &ybar, LossKind::Mse)
                .map_err(|e| match e {
                    Error::Numeric(msg) => {
                        Error::Numeric(format!("meta-training diverged at t={t}: {msg}"))
                    }
                    other => other,
                })?;
        }
        theta = interpolate(&theta, &inner, cfg.epsilon)?;
        hook(&MetaProgress {
            t,
            params: &theta,
            inner_loss: loss_sum / cfg.inner_steps as f64,
        })?;
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamConfig, Arch};

    fn setup() -> (NetworkParams, FrozenDenoiser, Vec<ImageBuffer>) {
        let arch = Arch { depth: 2, width: 4, kernel: 3, channels: 1 };
        let mut rng = Rng::new(1);
        let theta0 = NetworkParams::init(arch, &mut rng).unwrap();
        let mut g = theta0.clone();
        g.layers_mut()[1].weights.iter_mut().for_each(|w| *w = 0.01);
        let corpus = vec![
            ImageBuffer::filled(12, 12, 1, 0.3).unwrap(),
            ImageBuffer::filled(12, 12, 1, 0.6).unwrap(),
        ];
        (theta0, FrozenDenoiser::new(g), corpus)
    }

    fn small_cfg() -> MetaConfig {
        MetaConfig {
            outer_steps: 3,
            inner_steps: 2,
            epsilon: 0.5,
            patch: 8,
            batch: 2,
            adam: AdamConfig { lr: 1e-2, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn zero_outer_steps_return_theta0() {
        let (theta0, g, corpus) = setup();
        let cfg = MetaConfig { outer_steps: 0, ..small_cfg() };
        let out = meta_train_reptile(&theta0, &g, &corpus, &cfg, &Rng::new(2), |_| Ok(())).unwrap();
        assert_eq!(out, theta0);
    }

    #[test]
    fn zero_epsilon_keeps_theta0() {
        let (theta0, g, corpus) = setup();
        let cfg = MetaConfig { epsilon: 0.0, ..small_cfg() };
        let out = meta_train_reptile(&theta0, &g, &corpus, &cfg, &Rng::new(2), |_| Ok(())).unwrap();
        assert_eq!(out, theta0);
    }

    #[test]
    fn g_is_untouched_and_hook_sees_every_iteration() {
        let (theta0, g, corpus) = setup();
        let before = g.params().clone();
        let mut ts = Vec::new();
        let out = meta_train_reptile(&theta0, &g, &corpus, &small_cfg(), &Rng::new(3), |p| {
            ts.push(p.t);
            Ok(())
        })
        .unwrap();
        assert_eq!(g.params(), &before);
        assert_eq!(ts, vec![0, 1, 2, 3]);
        assert_ne!(out, theta0);
    }

    #[test]
    fn seeded_runs_match() {
        let (theta0, g, corpus) = setup();
        let a = meta_train_reptile(&theta0, &g, &corpus, &small_cfg(), &Rng::new(4), |_| Ok(())).unwrap();
        let b = meta_train_reptile(&theta0, &g, &corpus, &small_cfg(), &Rng::new(4), |_| Ok(())).unwrap();
        assert_eq!(a, b);
    }
}
