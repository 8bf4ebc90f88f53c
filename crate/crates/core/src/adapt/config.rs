use crate::error::{Error, Result};
use crate::nn::{AdamConfig, LossKind};
use crate::noise::{NoiseSpec, ScalePolicy};

/// Supervised pre-training on (noisy, clean) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub sigma_max255: f64,
    pub patch: usize,
    pub batch: usize,
    pub steps: usize,
    /// Random flips and rotations of each patch.
    pub augment: bool,
    pub adam: AdamConfig,
    /// Curve granularity: one record per this many steps.
    pub log_every: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            sigma_max255: 50.0,
            patch: 64,
            batch: 16,
            steps: 2000,
            augment: true,
            adam: AdamConfig::default(),
            log_every: 50,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_max255 > 0.0 && self.sigma_max255 <= 100.0) {
            return Err(Error::config("pretrain sigma_max must lie in (0, 100]"));
        }
        if self.patch == 0 || self.batch == 0 || self.log_every == 0 {
            return Err(Error::config("pretrain patch, batch and log_every must be positive"));
        }
        check_lr(&self.adam)
    }
}

/// Reptile meta-training.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    /// Outer iterations `T`.
    pub outer_steps: usize,
    /// Inner Adam steps `K` per outer iteration, one batch each.
    pub inner_steps: usize,
    /// Outer interpolation step.
    pub epsilon: f32,
    pub sigma_max255: f64,
    pub patch: usize,
    pub batch: usize,
    pub adam: AdamConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            outer_steps: 2000,
            inner_steps: 256,
            epsilon: 1e-5,
            sigma_max255: 50.0,
            patch: 64,
            batch: 16,
            adam: AdamConfig::default(),
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::config("meta inner_steps must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("meta epsilon must lie in [0, 1]"));
        }
        NoiseSpec::uniform(self.sigma_max255).validate()?;
        if self.patch == 0 || self.batch == 0 {
            return Err(Error::config("meta patch and batch must be positive"));
        }
        check_lr(&self.adam)
    }
}

/// Noise level of the re-noising `r` at test time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptMode {
    /// Unknown noise level: `sigma_r ~ U(0, sigma_max255)` every round.
    Blind { sigma_max255: f64 },
    /// Known noise level used as a constant.
    NonBlind { sigma255: f64 },
}

impl AdaptMode {
    pub fn noise_spec(&self) -> NoiseSpec {
        match *self {
            AdaptMode::Blind { sigma_max255 } => NoiseSpec::uniform(sigma_max255),
            AdaptMode::NonBlind { sigma255 } => NoiseSpec::fixed(sigma255),
        }
    }
}

/// Test-time adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    /// Adaptation rounds `N`.
    pub rounds: usize,
    pub mode: AdaptMode,
    /// Adam steps per round on the same `(Z, Ybar)` pair.
    pub inner_steps: usize,
    /// Interpolation step toward the per-round solution.
    pub epsilon: f32,
    pub scale: ScalePolicy,
    pub loss: LossKind,
    pub adam: AdamConfig,
    /// Record wall-clock time per round; off gives bitwise-reproducible reports.
    pub record_timing: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            mode: AdaptMode::Blind { sigma_max255: 50.0 },
            inner_steps: 8,
            epsilon: 1.0,
            scale: ScalePolicy::default(),
            loss: LossKind::Mse,
            adam: AdamConfig::default(),
            record_timing: true,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::config("adaptation inner_steps must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("adaptation epsilon must lie in (0, 1]"));
        }
        self.mode.noise_spec().validate()?;
        self.scale.validate()?;
        check_lr(&self.adam)
    }
}

fn check_lr(adam: &AdamConfig) -> Result<()> {
    if !(adam.lr > 0.0 && adam.lr.is_finite()) {
        return Err(Error::config(format!("learning rate {} must be positive", adam.lr)));
    }
    if !(0.0..1.0).contains(&adam.beta1) || !(0.0..1.0).contains(&adam.beta2) {
        return Err(Error::config("Adam betas must lie in [0, 1)"));
    }
    Ok(())
}
