//! Patch extraction.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::Rng;

#[derive(Debug)]
pub enum PatchMode<'a> {
    /// Regular grid with the given stride, row-major order.
    Grid { stride: usize },
    /// `count` patches with uniformly drawn top-left corners.
    Random { count: usize, rng: &'a mut Rng },
}

/// Square patches of side `size`, all fully inside `x`.
pub fn extract_patches(x: &ImageBuffer, size: usize, mode: PatchMode<'_>) -> Result<Vec<ImageBuffer>> {
    if size == 0 || size > x.height().min(x.width()) {
        return Err(Error::shape(format!(
            "patch size {size} does not fit a {}x{} image",
            x.height(),
            x.width()
        )));
    }
    let (max_top, max_left) = (x.height() - size, x.width() - size);
    match mode {
        PatchMode::Grid { stride } => {
            if stride == 0 {
                return Err(Error::config("grid stride must be positive"));
            }
            let mut out = Vec::new();
            for top in (0..=max_top).step_by(stride) {
                for left in (0..=max_left).step_by(stride) {
                    out.push(x.crop(top, left, size, size)?);
                }
            }
            Ok(out)
        }
        PatchMode::Random { count, rng } => (0..count)
            .map(|_| {
                let top = rng.below(max_top + 1);
                let left = rng.below(max_left + 1);
                x.crop(top, left, size, size)
            })
            .collect(),
    }
}

/// The centred `size`x`size` window of `x`.
pub fn central_crop(x: &ImageBuffer, size: usize) -> Result<ImageBuffer> {
    if size > x.height() || size > x.width() {
        return Err(Error::shape(format!("central crop {size} exceeds image")));
    }
    x.crop((x.height() - size) / 2, (x.width() - size) / 2, size, size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> ImageBuffer {
        let data = (0..n * n).map(|i| i as f32 / (n * n) as f32).collect();
        ImageBuffer::new(n, n, 1, data).unwrap()
    }

    #[test]
    fn full_size_patch_is_the_image() {
        let x = ramp(16);
        let p = extract_patches(&x, 16, PatchMode::Grid { stride: 1 }).unwrap();
        assert_eq!(p, vec![x.clone()]);
        let mut rng = Rng::new(0);
        let q = extract_patches(&x, 16, PatchMode::Random { count: 3, rng: &mut rng }).unwrap();
        assert!(q.iter().all(|p| *p == x));
    }

    #[test]
    fn grid_count() {
        let x = ramp(128);
        assert_eq!(extract_patches(&x, 64, PatchMode::Grid { stride: 64 }).unwrap().len(), 4);
        assert_eq!(extract_patches(&x, 64, PatchMode::Grid { stride: 32 }).unwrap().len(), 9);
    }

    #[test]
    fn central_crop_indexing() {
        let x = ramp(128);
        let c = central_crop(&x, 64).unwrap();
        assert_eq!(c.get(0, 0, 0), x.get(0, 32, 32));
        assert_eq!(c.get(0, 63, 63), x.get(0, 95, 95));
    }

    #[test]
    fn random_patches_stay_inside() {
        let x = ramp(20);
        let mut rng = Rng::new(5);
        let ps = extract_patches(&x, 7, PatchMode::Random { count: 200, rng: &mut rng }).unwrap();
        assert!(ps.iter().all(|p| p.height() == 7 && p.width() == 7));
    }

    #[test]
    fn oversize_is_rejected() {
        let x = ramp(8);
        assert!(extract_patches(&x, 9, PatchMode::Grid { stride: 1 }).is_err());
        assert!(central_crop(&x, 9).is_err());
    }
}
