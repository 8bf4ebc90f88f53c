//! Bilinear resampling with half-pixel-centred coordinates.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Smallest output side accepted by [`resize_bilinear`].
pub const MIN_RESIZED_SIDE: usize = 8;

/// Resizes by factor `scale` in both directions; `scale == 1` returns an
/// exact copy. Output sides are `round(side * scale)`.
pub fn resize_bilinear(x: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if !(0.1..=2.0).contains(&scale) {
        return Err(Error::config(format!("scale {scale} outside [0.1, 2]")));
    }
    if scale == 1.0 {
        return Ok(x.clone());
    }
    let oh = (x.height() as f64 * scale).round() as usize;
    let ow = (x.width() as f64 * scale).round() as usize;
    if oh < MIN_RESIZED_SIDE || ow < MIN_RESIZED_SIDE {
        return Err(Error::shape(format!(
            "resized image {oh}x{ow} is below the {MIN_RESIZED_SIDE}-pixel minimum"
        )));
    }
    resize_to(x, oh, ow)
}

/// Resamples to an explicit output size (any size ≥ 1).
pub fn resize_to(x: &ImageBuffer, out_h: usize, out_w: usize) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::shape("output size must be positive"));
    }
    let (h, w, c) = x.dims();
    if (out_h, out_w) == (h, w) {
        return Ok(x.clone());
    }
    let rows = taps(h, out_h);
    let cols = taps(w, out_w);
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for ch in 0..c {
        let plane = x.plane(ch);
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = plane[y0 * w + x0] as f64 * (1.0 - fx) + plane[y0 * w + x1] as f64 * fx;
                let bot = plane[y1 * w + x0] as f64 * (1.0 - fx) + plane[y1 * w + x1] as f64 * fx;
                data.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    let out = ImageBuffer::new(out_h, out_w, c, data)?;
    Ok(if x.is_unclipped() {
        ImageBuffer::new_unclipped(out_h, out_w, c, out.data().to_vec())?
    } else {
        out
    })
}

/// Source index pair and blend weight for every output coordinate.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_is_bitwise_identity() {
        let data: Vec<f32> = (0..100).map(|i| (i as f32 * 0.37).sin().abs()).collect();
        let x = ImageBuffer::new(10, 10, 1, data).unwrap();
        assert_eq!(resize_bilinear(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn constants_are_preserved() {
        let x = ImageBuffer::filled(20, 30, 3, 0.42).unwrap();
        for s in [0.4, 0.6, 0.8, 1.2, 2.0] {
            let y = resize_bilinear(&x, s).unwrap();
            assert!(y.data().iter().all(|v| (*v - 0.42).abs() < 1e-6), "{s}");
        }
    }

    #[test]
    fn checkerboard_upscale_matches_hand_grid() {
        let x = ImageBuffer::new(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let y = resize_to(&x, 4, 4).unwrap();
        let expect = [
            0.0, 0.25, 0.75, 1.0, //
            0.25, 0.375, 0.625, 0.75, //
            0.75, 0.625, 0.375, 0.25, //
            1.0, 0.75, 0.25, 0.0,
        ];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn tiled_checkerboard_doubles() {
        // 8x8 single-pixel checkerboard; interior of the 2x upscale follows
        // the same weights as the 2x2 case.
        let data = (0..64).map(|i| ((i / 8 + i % 8) % 2) as f32).collect();
        let x = ImageBuffer::new(8, 8, 1, data).unwrap();
        let y = resize_bilinear(&x, 2.0).unwrap();
        assert_eq!((y.height(), y.width()), (16, 16));
        assert_eq!(y.get(0, 1, 1), 0.375);
        assert_eq!(y.get(0, 1, 2), 0.625);
        assert_eq!(y.get(0, 0, 0), 0.0);
        assert_eq!(y.get(0, 0, 1), 0.25);
    }

    #[test]
    fn rejects_bad_scales() {
        let x = ImageBuffer::filled(16, 16, 1, 0.5).unwrap();
        assert!(resize_bilinear(&x, 0.05).is_err());
        assert!(resize_bilinear(&x, 2.5).is_err());
        assert!(resize_bilinear(&x, 0.4).is_err()); // 6x6 output
        assert!(resize_bilinear(&x, 0.5).is_ok());
    }
}
