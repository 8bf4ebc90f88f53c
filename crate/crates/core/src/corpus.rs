//! Procedural tiled-texture images: a random motif repeated over the
//! canvas, a stand-in for scenes with many repeated man-made structures.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Side of the repeating motif.
    pub motif: usize,
    /// Standard deviation of a per-tile brightness offset; 0 gives exact
    /// repetition.
    pub tile_jitter: f32,
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            channels: 1,
            motif: 16,
            tile_jitter: 0.01,
        }
    }
}

fn motif(cfg: &TextureConfig, rng: &mut Rng) -> Vec<f32> {
    let m = cfg.motif;
    let mut planes = Vec::with_capacity(m * m * cfg.channels);
    let base: Vec<f32> = (0..cfg.channels).map(|_| rng.uniform_range(0.2, 0.8) as f32).collect();
    let mut tile = vec![0.0f32; m * m * cfg.channels];
    for c in 0..cfg.channels {
        tile[c * m * m..(c + 1) * m * m].fill(base[c]);
    }
    let shapes = 3 + rng.below(3);
    for _ in 0..shapes {
        let value: Vec<f32> = (0..cfg.channels).map(|_| rng.uniform_range(0.05, 0.95) as f32).collect();
        if rng.uniform() < 0.25 {
            // diagonal stroke
            let offset = rng.below(m) as isize;
            let thick = 1 + rng.below(2) as isize;
            for y in 0..m as isize {
                for x in 0..m as isize {
                    if ((x - y - offset).rem_euclid(m as isize)) < thick {
                        for c in 0..cfg.channels {
                            tile[c * m * m + (y as usize) * m + x as usize] = value[c];
                        }
                    }
                }
            }
        } else {
            let h = 2 + rng.below(m / 2);
            let w = 2 + rng.below(m / 2);
            let top = rng.below(m - h + 1);
            let left = rng.below(m - w + 1);
            for y in top..top + h {
                for x in left..left + w {
                    for c in 0..cfg.channels {
                        tile[c * m * m + y * m + x] = value[c];
                    }
                }
            }
        }
    }
    planes.extend_from_slice(&tile);
    planes
}

/// One tiled-texture image.
pub fn tiled_texture(cfg: &TextureConfig, rng: &mut Rng) -> Result<ImageBuffer> {
    if cfg.motif < 4 || cfg.height < cfg.motif || cfg.width < cfg.motif {
        return Err(Error::config(format!("texture geometry {cfg:?} is too small")));
    }
    let m = cfg.motif;
    let tile = motif(cfg, rng);
    let (oy, ox) = (rng.below(m), rng.below(m));
    let tiles_y = (cfg.height + oy).div_ceil(m);
    let tiles_x = (cfg.width + ox).div_ceil(m);
    let offsets: Vec<f32> = (0..tiles_y * tiles_x)
        .map(|_| (rng.normal() * cfg.tile_jitter as f64) as f32)
        .collect();
    let mut data = Vec::with_capacity(cfg.height * cfg.width * cfg.channels);
    for c in 0..cfg.channels {
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let (ty, tx) = ((y + oy) / m, (x + ox) / m);
                let v = tile[c * m * m + ((y + oy) % m) * m + (x + ox) % m] + offsets[ty * tiles_x + tx];
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImageBuffer::new(cfg.height, cfg.width, cfg.channels, data)
}

/// `count` independent textures, image `i` drawn from sub-stream `i`.
pub fn toy_corpus(count: usize, cfg: &TextureConfig, rng: &Rng) -> Result<Vec<ImageBuffer>> {
    (0..count)
        .map(|i| tiled_texture(cfg, &mut rng.fork(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_repetition_without_jitter() {
        let cfg = TextureConfig {
            tile_jitter: 0.0,
            ..Default::default()
        };
        let img = tiled_texture(&cfg, &mut Rng::new(3)).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                assert_eq!(img.get(0, y, x), img.get(0, y + 16, x + 16));
            }
        }
        assert!(!img.is_unclipped());
    }

    #[test]
    fn corpus_is_seeded_and_varied() {
        let cfg = TextureConfig::default();
        let a = toy_corpus(3, &cfg, &Rng::new(1)).unwrap();
        let b = toy_corpus(3, &cfg, &Rng::new(1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let var = |img: &ImageBuffer| {
            let n = img.data().len() as f64;
            let m = img.data().iter().map(|v| *v as f64).sum::<f64>() / n;
            img.data().iter().map(|v| (*v as f64 - m).powi(2)).sum::<f64>() / n
        };
        assert!(a.iter().all(|img| var(img) > 1e-3));
    }

    #[test]
    fn color_textures() {
        let cfg = TextureConfig {
            channels: 3,
            ..Default::default()
        };
        let img = tiled_texture(&cfg, &mut Rng::new(2)).unwrap();
        assert_eq!(img.channels(), 3);
    }
}
