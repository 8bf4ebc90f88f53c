//! Additive white Gaussian noise and the random scale policy.
//!
//! Noise levels are quoted on the 0–255 scale and divided by 255 when
//! applied to `[0, 1]` pixels. Noisy outputs are never clipped.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::Rng;

/// How the noise standard deviation is chosen for each draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Fixed { sigma255: f64 },
    /// `sigma ~ U(0, sigma_max255)`.
    Uniform { sigma_max255: f64 },
}

impl NoiseSpec {
    pub fn fixed(sigma255: f64) -> Self {
        NoiseSpec::Fixed { sigma255 }
    }

    pub fn uniform(sigma_max255: f64) -> Self {
        NoiseSpec::Uniform { sigma_max255 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Fixed { sigma255 } if !(sigma255 >= 0.0 && sigma255.is_finite()) => Err(
                Error::config(format!("noise level {sigma255} must be finite and non-negative")),
            ),
            NoiseSpec::Uniform { sigma_max255 } if !(sigma_max255 > 0.0 && sigma_max255.is_finite()) => {
                Err(Error::config(format!(
                    "maximum noise level {sigma_max255} must be positive"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Draws a noise level on the 0–255 scale.
    pub fn draw_sigma(&self, rng: &mut Rng) -> f64 {
        match *self {
            NoiseSpec::Fixed { sigma255 } => sigma255,
            NoiseSpec::Uniform { sigma_max255 } => rng.uniform_range(0.0, sigma_max255),
        }
    }
}

/// Adds i.i.d. `N(0, (sigma/255)^2)` noise to every pixel. Returns the noisy
/// image (unclipped) and the drawn sigma on the 0–255 scale.
pub fn add_gaussian_noise(x: &ImageBuffer, spec: &NoiseSpec, rng: &mut Rng) -> Result<(ImageBuffer, f64)> {
    spec.validate()?;
    let sigma255 = spec.draw_sigma(rng);
    Ok((add_noise_sigma(x, sigma255, rng), sigma255))
}

pub(crate) fn add_noise_sigma(x: &ImageBuffer, sigma255: f64, rng: &mut Rng) -> ImageBuffer {
    let sigma = sigma255 / 255.0;
    if sigma == 0.0 {
        return x.map_values(true, |_, v| v);
    }
    x.map_values(true, |_, v| v + (rng.normal() * sigma) as f32)
}

/// How the resize factor is chosen at each adaptation round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePolicy {
    Fixed(f64),
    /// `N(mu, sd)` clamped to `[lo, hi]`.
    GaussianClipped { mu: f64, sd: f64, lo: f64, hi: f64 },
}

impl Default for ScalePolicy {
    fn default() -> Self {
        ScalePolicy::GaussianClipped {
            mu: 0.8,
            sd: 0.1,
            lo: 0.6,
            hi: 1.0,
        }
    }
}

impl ScalePolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalePolicy::Fixed(s) => s > 0.0 && s <= 1.25,
            ScalePolicy::GaussianClipped { sd, lo, hi, mu } => {
                lo > 0.0 && lo <= hi && hi <= 1.25 && sd >= 0.0 && mu.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid scale policy {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            ScalePolicy::Fixed(s) => s,
            ScalePolicy::GaussianClipped { mu, sd, lo, hi } => (mu + sd * rng.normal()).clamp(lo, hi),
        }
    }
}

impl std::fmt::Display for ScalePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalePolicy::Fixed(s) => write!(f, "fixed:{s}"),
            ScalePolicy::GaussianClipped { mu, sd, lo, hi } => {
                write!(f, "gaussian:{mu}:{sd}:{lo}:{hi}")
            }
        }
    }
}

impl std::str::FromStr for ScalePolicy {
    type Err = Error;

    /// `fixed:<s>`, a bare number, `gaussian` (defaults) or
    /// `gaussian:<mu>:<sd>:<lo>:<hi>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("cannot parse scale policy {s:?}"));
        let policy = if s == "gaussian" {
            ScalePolicy::default()
        } else if let Some(rest) = s.strip_prefix("gaussian:") {
            let v: Vec<f64> = rest
                .split(':')
                .map(|p| p.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(bad());
            }
            ScalePolicy::GaussianClipped {
                mu: v[0],
                sd: v[1],
                lo: v[2],
                hi: v[3],
            }
        } else {
            let v = s.strip_prefix("fixed:").unwrap_or(s);
            ScalePolicy::Fixed(v.parse().map_err(|_| bad())?)
        };
        policy.validate()?;
        Ok(policy)
    }
}
