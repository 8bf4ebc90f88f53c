//! Image sets for training and evaluation.

use std::path::Path;

use mdn_core::corpus::{toy_corpus, TextureConfig};
use mdn_core::image::ImageBuffer;
use mdn_core::imageio::{from_bytes, read_image, to_bytes, write_image, ImageFormat};
use mdn_core::noise::{add_gaussian_noise, NoiseSpec};
use mdn_core::Rng;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct NamedImage {
    pub id: String,
    pub image: ImageBuffer,
}

/// A clean image and its noisy observation.
#[derive(Debug, Clone)]
pub struct EvalImage {
    pub id: String,
    pub clean: ImageBuffer,
    pub noisy: ImageBuffer,
    pub sigma255: f64,
}

/// Every PNG/PGM/PPM file in `dir`, sorted by file name. Unreadable files and
/// files with the wrong channel count are skipped with a warning.
pub fn load_dir(dir: &Path, channels: usize) -> Result<Vec<NamedImage>> {
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p).is_ok())
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        match read_image(&path) {
            Ok(img) if img.channels() == channels => out.push(NamedImage {
                id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                image: img,
            }),
            Ok(img) => eprintln!(
                "warning: skipping {}: {} channels, expected {channels}",
                path.display(),
                img.channels()
            ),
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        return Err(HarnessError::data(format!("no usable images in {}", dir.display())));
    }
    Ok(out)
}

/// Seeded toy textures, quantized to 8 bits so they match what
/// [`write_toy`] puts on disk.
pub fn toy(count: usize, cfg: &TextureConfig, rng: &Rng, prefix: &str) -> Result<Vec<NamedImage>> {
    toy_corpus(count, cfg, rng)?
        .into_iter()
        .enumerate()
        .map(|(i, img)| {
            let (h, w, c) = img.dims();
            Ok(NamedImage {
                id: format!("{prefix}_{i:04}"),
                image: from_bytes(h, w, c, &to_bytes(&img))?,
            })
        })
        .collect()
}

pub fn write_toy(dir: &Path, count: usize, cfg: &TextureConfig, seed: u64) -> Result<Vec<NamedImage>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let images = toy(count, cfg, &Rng::new(seed).stream("toy"), "toy")?;
    for img in &images {
        write_image(&dir.join(format!("{}.png", img.id)), &img.image)?;
    }
    Ok(images)
}

fn texture(cfg: &ExperimentConfig) -> TextureConfig {
    TextureConfig {
        channels: cfg.arch.channels,
        ..cfg.data.toy
    }
}

/// Clean training images: the configured directory or the toy corpus.
pub fn train_set(cfg: &ExperimentConfig) -> Result<Vec<ImageBuffer>> {
    let named = match &cfg.data.train_dir {
        Some(dir) => load_dir(dir, cfg.arch.channels)?,
        None => toy(cfg.data.toy_train, &texture(cfg), &Rng::new(cfg.seed).stream("toy-train"), "train")?,
    };
    Ok(named.into_iter().map(|n| n.image).collect())
}

/// Clean evaluation images, disjoint from the toy training set.
pub fn eval_clean(cfg: &ExperimentConfig) -> Result<Vec<NamedImage>> {
    match &cfg.data.eval_dir {
        Some(dir) => load_dir(dir, cfg.arch.channels),
        None => toy(cfg.data.toy_eval, &texture(cfg), &Rng::new(cfg.seed).stream("toy-eval"), "eval"),
    }
}

/// Evaluation images with Gaussian noise of level `sigma255`. The noise of
/// image `i` depends only on the seed, `sigma255`'s stream and `i`.
pub fn eval_set(cfg: &ExperimentConfig, sigma255: f64) -> Result<Vec<EvalImage>> {
    corrupt_all(eval_clean(cfg)?, sigma255, &Rng::new(cfg.seed).stream("eval-noise"))
}

pub fn corrupt_all(clean: Vec<NamedImage>, sigma255: f64, rng: &Rng) -> Result<Vec<EvalImage>> {
    clean
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let (noisy, _) = add_gaussian_noise(&n.image, &NoiseSpec::fixed(sigma255), &mut rng.fork(i as u64))?;
            Ok(EvalImage {
                id: n.id,
                clean: n.image,
                noisy,
                sigma255,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_on_disk_matches_memory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TextureConfig {
            height: 24,
            width: 20,
            ..Default::default()
        };
        let mem = write_toy(dir.path(), 3, &cfg, 5).unwrap();
        let disk = load_dir(dir.path(), 1).unwrap();
        assert_eq!(disk.len(), 3);
        for (a, b) in mem.iter().zip(&disk) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.image, b.image);
        }
    }

    #[test]
    fn empty_or_junk_dir_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dir(dir.path(), 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        std::fs::write(dir.path().join("broken.png"), b"nope").unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"hi").unwrap();
        assert!(load_dir(dir.path(), 1).is_err());
        let img = ImageBuffer::filled(8, 8, 1, 0.5).unwrap();
        write_image(&dir.path().join("ok.pgm"), &img).unwrap();
        let got = load_dir(dir.path(), 1).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "ok");
    }

    #[test]
    fn eval_noise_is_seeded() {
        let mut cfg = ExperimentConfig::default();
        cfg.data.toy_eval = 2;
        cfg.data.toy.height = 16;
        cfg.data.toy.width = 16;
        let a = eval_set(&cfg, 20.0).unwrap();
        let b = eval_set(&cfg, 20.0).unwrap();
        assert_eq!(a[1].noisy, b[1].noisy);
        assert_ne!(a[0].noisy, a[1].noisy);
        let train = train_set(&cfg).unwrap();
        assert!(train.iter().all(|t| *t != a[0].clean));
    }
}
