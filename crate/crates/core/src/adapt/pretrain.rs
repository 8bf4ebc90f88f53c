use super::{check_channels, patch_side, sample_clean_patches, stack_images, train_step, PretrainConfig};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::nn::{AdamState, LossKind, NetworkParams};
use crate::noise::{add_gaussian_noise, NoiseSpec};
use crate::rng::Rng;

/// Mean loss over a window of optimizer steps ending at `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
}

/// Supervised training on `(X + n, X)` patch pairs with
/// `sigma_n ~ U(0, sigma_max)` drawn per patch.
pub fn pretrain_noise2truth(
    init: NetworkParams,
    corpus: &[ImageBuffer],
    cfg: &PretrainConfig,
    rng: &Rng,
) -> Result<(NetworkParams, Vec<StepRecord>)> {
    cfg.validate()?;
    let side = patch_side(corpus, cfg.patch)?;
    for img in corpus {
        check_channels(&init, img.channels())?;
    }
    let mut data_rng = rng.stream("pretrain-data");
    let mut noise_rng = rng.stream("pretrain-noise");
    let spec = NoiseSpec::uniform(cfg.sigma_max255);
    let mut params = init;
    let mut adam = AdamState::new(&params, cfg.adam);
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0usize;
    for step in 1..=cfg.steps {
        let clean = sample_clean_patches(corpus, side, cfg.batch, cfg.augment, &mut data_rng)?;
        let noisy = clean
            .iter()
            .map(|x| add_gaussian_noise(x, &spec, &mut noise_rng).map(|(y, _)| y))
            .collect::<Result<Vec<_>>>()?;
        let loss = train_step(
            &mut params,
            &mut adam,
            &stack_images(&noisy)?,
            &stack_images(&clean)?,
            LossKind::Mse,
        )
        .map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("pre-training diverged at step {step}: {msg}")),
            other => other,
        })?;
        window += loss;
        window_len += 1;
        if step % cfg.log_every == 0 || step == cfg.steps {
            curve.push(StepRecord {
                step,
                loss: window / window_len as f64,
            });
            window = 0.0;
            window_len = 0;
        }
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{clip01, psnr};
    use crate::nn::{AdamConfig, Arch};

    fn arch() -> Arch {
        Arch { depth: 3, width: 8, kernel: 3, channels: 1 }
    }

    #[test]
    fn zero_steps_return_init() {
        let init = NetworkParams::init(arch(), &mut Rng::new(1)).unwrap();
        let corpus = vec![ImageBuffer::filled(16, 16, 1, 0.5).unwrap()];
        let cfg = PretrainConfig { steps: 0, ..Default::default() };
        let (p, curve) = pretrain_noise2truth(init.clone(), &corpus, &cfg, &Rng::new(2)).unwrap();
        assert_eq!(p, init);
        assert!(curve.is_empty());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let init = NetworkParams::zeros(arch()).unwrap();
        let cfg = PretrainConfig::default();
        assert!(matches!(
            pretrain_noise2truth(init, &[], &cfg, &Rng::new(0)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn constant_images_are_learned() {
        let corpus: Vec<ImageBuffer> = [0.2f32, 0.5, 0.7]
            .iter()
            .map(|v| ImageBuffer::filled(24, 24, 1, *v).unwrap())
            .collect();
        let init = NetworkParams::init(arch(), &mut Rng::new(3)).unwrap();
        let cfg = PretrainConfig {
            sigma_max255: 30.0,
            patch: 16,
            batch: 4,
            steps: 300,
            adam: AdamConfig { lr: 2e-3, ..Default::default() },
            ..Default::default()
        };
        let (p, curve) = pretrain_noise2truth(init, &corpus, &cfg, &Rng::new(4)).unwrap();
        assert!(curve.last().unwrap().loss < curve[0].loss);
        let x = ImageBuffer::filled(24, 24, 1, 0.5).unwrap();
        let (y, _) = add_gaussian_noise(&x, &NoiseSpec::fixed(20.0), &mut Rng::new(5)).unwrap();
        let out = super::super::denoise(&p, &y).unwrap();
        assert!(psnr(&x, &out).unwrap() > psnr(&x, &clip01(&y)).unwrap());
    }
}
