//! Blind-spot (Noise2Void-style) adaptation baseline.
//!
//! For each sampled patch the centre input pixel is replaced by a pixel
//! drawn uniformly from its `(2r+1)^2` neighbourhood (centre excluded), and
//! the loss compares the network's centre prediction with that neighbour's
//! noisy value.

use std::time::Instant;

use super::{check_channels, denoise, AdaptReport, RoundRecord};
use crate::error::{Error, Result};
use crate::image::{clip01, psnr, ImageBuffer};
use crate::nn::{adam_step, network_backward, network_forward, AdamConfig, AdamState, NetworkParams};
use crate::rng::Rng;
use crate::tensor::{Shape4, Tensor4};

#[derive(Debug, Clone, PartialEq)]
pub struct BlindSpotConfig {
    /// Adam steps.
    pub rounds: usize,
    /// Side of the sampled patches.
    pub patch: usize,
    /// Patches per step.
    pub batch: usize,
    /// Neighbourhood radius; 2 gives the 5x5 window.
    pub radius: usize,
    pub adam: AdamConfig,
    pub record_timing: bool,
}

impl Default for BlindSpotConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            patch: 24,
            batch: 16,
            radius: 2,
            adam: AdamConfig::default(),
            record_timing: true,
        }
    }
}

/// Extracts the centre pixel of every patch (`M_i`).
fn center_mask(shape: Shape4) -> (usize, usize) {
    (shape.height / 2, shape.width / 2)
}

/// Returns `(x_tilde, theta_final, report)`.
pub fn blindspot_adapt(
    y: &ImageBuffer,
    theta_init: &NetworkParams,
    cfg: &BlindSpotConfig,
    rng: &Rng,
    ground_truth: Option<&ImageBuffer>,
) -> Result<(ImageBuffer, NetworkParams, AdaptReport)> {
    check_channels(theta_init, y.channels())?;
    let window = 2 * cfg.radius + 1;
    if cfg.radius == 0 || cfg.patch < window {
        return Err(Error::config(format!(
            "blind-spot patch {} is smaller than the {window}x{window} neighbourhood",
            cfg.patch
        )));
    }
    if cfg.patch > y.height().min(y.width()) || cfg.batch == 0 {
        return Err(Error::config("blind-spot patch does not fit the image"));
    }
    let truth = ground_truth.map(clip01);
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
    let mut adam = AdamState::new(&theta, cfg.adam);
    let mut rng = rng.stream("blindspot");
    let (p, c) = (cfg.patch, y.channels());
    let shape = Shape4::new(cfg.batch, c, p, p);
    let (cy, cx) = center_mask(shape);
    let r = cfg.radius as isize;
    for round in 1..=cfg.rounds {
        let started = Instant::now();
        let mut input = Tensor4::zeros(shape);
        let mut targets = Vec::with_capacity(cfg.batch * c);
        for b in 0..cfg.batch {
            let top = rng.below(y.height() - p + 1);
            let left = rng.below(y.width() - p + 1);
            // M_i': a uniformly chosen neighbour, never the centre
            let (dy, dx) = loop {
                let dy = rng.below(window) as isize - r;
                let dx = rng.below(window) as isize - r;
                if (dy, dx) != (0, 0) {
                    break (dy, dx);
                }
            };
            let (ny, nx) = ((cy as isize + dy) as usize, (cx as isize + dx) as usize);
            for ch in 0..c {
                for yy in 0..p {
                    for xx in 0..p {
                        input.set(b, ch, yy, xx, y.get(ch, top + yy, left + xx));
                    }
                }
                let neighbour = y.get(ch, top + ny, left + nx);
                input.set(b, ch, cy, cx, neighbour);
                targets.push(neighbour);
            }
        }
        let (pred, tape) = network_forward(&theta, &input)?;
        let count = targets.len() as f32;
        let mut grad = Tensor4::zeros(shape);
        let mut loss = 0.0f64;
        for b in 0..cfg.batch {
            for ch in 0..c {
                let d = pred.get(b, ch, cy, cx) - targets[b * c + ch];
                loss += (d as f64) * (d as f64);
                grad.set(b, ch, cy, cx, 2.0 * d / count);
            }
        }
        let loss = loss / count as f64;
        let grads = network_backward(&theta, &tape, &grad)?;
        adam_step(&mut theta, &grads, &mut adam)?;
        report.rounds.push(RoundRecord {
            round,
            sigma_r: 0.0,
            scale: 1.0,
            loss,
            psnr_db: score(&theta)?,
            wall_ms: if cfg.record_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
    }
    Ok((denoise(&theta, y)?, theta, report))
}
