//! Pre-training, meta-training and test-time adaptation.
//!
//! Two networks are involved everywhere: a frozen denoiser `g` (the
//! supervised pre-trained weights, never updated) and a trainable denoiser
//! `f`. Self-supervised training pairs are built as `(Z, Ybar)` with
//! `Ybar = g(Y)` and `Z = Ybar + r`, `r` fresh Gaussian noise.

mod blindspot;
mod config;
mod infer;
mod meta;
mod pretrain;

pub use blindspot::{blindspot_adapt, BlindSpotConfig};
pub use config::{AdaptConfig, AdaptMode, MetaConfig, PretrainConfig};
pub use infer::{adapt_denoise, adapt_denoise_observed, finetune_baseline, TrainingPair};
pub use meta::{meta_train_reptile, MetaProgress};
pub use pretrain::{pretrain_noise2truth, StepRecord};

use crate::error::{Error, Result};
use crate::image::{clip01, ImageBuffer};
use crate::nn::{adam_step, network_backward, network_forward, AdamState, LossKind, NetworkParams};
use crate::patches::{extract_patches, PatchMode};
use crate::rng::Rng;
use crate::tensor::Tensor4;

/// The non-trainable denoiser `g`. Only shared access to its parameters
/// is ever handed out.
#[derive(Debug, Clone)]
pub struct FrozenDenoiser {
    params: NetworkParams,
}

impl FrozenDenoiser {
    pub fn new(params: NetworkParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn apply(&self, y: &Tensor4) -> Result<Tensor4> {
        Ok(network_forward(&self.params, y)?.0)
    }
}

/// `Ybar = g(Y)`, left unclipped.
pub fn denoise_frozen(g: &FrozenDenoiser, y: &ImageBuffer) -> Result<ImageBuffer> {
    let out = g.apply(&y.to_tensor())?;
    ImageBuffer::from_tensor(&out, 0)
}

/// `f(y; params)`, unclipped.
pub fn predict(params: &NetworkParams, y: &ImageBuffer) -> Result<ImageBuffer> {
    let (out, _) = network_forward(params, &y.to_tensor())?;
    ImageBuffer::from_tensor(&out, 0)
}

/// `clip01(f(y; params))`, the displayed/evaluated output.
pub fn denoise(params: &NetworkParams, y: &ImageBuffer) -> Result<ImageBuffer> {
    Ok(clip01(&predict(params, y)?))
}

/// Forward, loss, backward and one Adam update. Returns the loss before the
/// update.
pub(crate) fn train_step(
    params: &mut NetworkParams,
    adam: &mut AdamState,
    input: &Tensor4,
    target: &Tensor4,
    loss: LossKind,
) -> Result<f64> {
    let (pred, tape) = network_forward(params, input)?;
    let (value, grad) = loss.eval(&pred, target)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss became {value}")));
    }
    let grads = network_backward(params, &tape, &grad)?;
    adam_step(params, &grads, adam)?;
    Ok(value)
}

/// Side of the square training patches that fit every image in `corpus`.
pub(crate) fn patch_side(corpus: &[ImageBuffer], wanted: usize) -> Result<usize> {
    let smallest = corpus
        .iter()
        .map(|img| img.height().min(img.width()))
        .min()
        .ok_or_else(|| Error::Data("training corpus is empty".into()))?;
    Ok(wanted.min(smallest))
}

/// Random clean patches, optionally augmented with a random flip/rotation.
pub(crate) fn sample_clean_patches(
    corpus: &[ImageBuffer],
    side: usize,
    count: usize,
    augment: bool,
    rng: &mut Rng,
) -> Result<Vec<ImageBuffer>> {
    (0..count)
        .map(|_| {
            let img = &corpus[rng.below(corpus.len())];
            let patch = extract_patches(img, side, PatchMode::Random { count: 1, rng })?
                .pop()
                .expect("one patch requested");
            Ok(if augment {
                patch.dihedral(rng.below(8) as u8)
            } else {
                patch
            })
        })
        .collect()
}

pub(crate) fn stack_images(images: &[ImageBuffer]) -> Result<Tensor4> {
    let tensors: Vec<Tensor4> = images.iter().map(|i| i.to_tensor()).collect();
    Tensor4::stack(&tensors)
}

pub(crate) fn check_channels(params: &NetworkParams, channels: usize) -> Result<()> {
    if params.arch().channels != channels {
        return Err(Error::shape(format!(
            "{} expects {} image channels, data has {channels}",
            params.arch(),
            params.arch().channels
        )));
    }
    Ok(())
}

/// Per-round (or per-step) record of an adaptation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    /// Re-noising level drawn for this round (0–255 scale).
    pub sigma_r: f64,
    pub scale: f64,
    /// Mean training loss over the round's optimizer steps.
    pub loss: f64,
    /// PSNR of `clip01(f(Y))` against ground truth after the round.
    pub psnr_db: Option<f64>,
    /// Zero when timing is disabled.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptReport {
    /// PSNR of the initial parameters, when ground truth was supplied.
    pub initial_psnr_db: Option<f64>,
    pub rounds: Vec<RoundRecord>,
}

impl AdaptReport {
    pub fn final_psnr_db(&self) -> Option<f64> {
        match self.rounds.last() {
            Some(r) => r.psnr_db,
            None => self.initial_psnr_db,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    /// `clip01(f(Y; theta_final))`.
    pub denoised: ImageBuffer,
    pub params: NetworkParams,
    pub report: AdaptReport,
}
