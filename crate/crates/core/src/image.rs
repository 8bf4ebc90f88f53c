//! Planar floating-point images and the PSNR metric.

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// An image with values nominally in `[0, 1]`, stored channel-planar.
///
/// `unclipped` marks buffers that may hold values outside `[0, 1]` (noisy
/// observations, raw network outputs). Only [`clip01`] clears it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
    unclipped: bool,
}

impl ImageBuffer {
    /// Builds an image from planar values; the marker is set if any value
    /// lies outside `[0, 1]`.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::shape(format!(
                "invalid image geometry {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite pixel".into()));
        }
        let unclipped = data.iter().any(|v| !(0.0..=1.0).contains(v));
        Ok(Self {
            height,
            width,
            channels,
            data,
            unclipped,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Like [`Self::new`] but always carries the unclipped marker.
    pub fn new_unclipped(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let mut img = Self::new(height, width, channels, data)?;
        img.unclipped = true;
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_unclipped(&self) -> bool {
        self.unclipped
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let p = self.height * self.width;
        &self.data[c * p..(c + 1) * p]
    }

    pub fn ensure_same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "image {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    /// A `(1, channels, height, width)` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec(
            Shape4::new(1, self.channels, self.height, self.width),
            self.data.clone(),
        )
        .expect("image invariants guarantee a valid tensor")
    }

    /// Extracts batch item `index` of a tensor as an unclipped image.
    pub fn from_tensor(t: &Tensor4, index: usize) -> Result<Self> {
        let s = t.shape();
        if index >= s.batch {
            return Err(Error::shape(format!("batch index {index} out of {s}")));
        }
        let n = s.channels * s.plane();
        let data = t.data()[index * n..(index + 1) * n].to_vec();
        Self::new_unclipped(s.height, s.width, s.channels, data)
    }

    /// Sub-image with top-left corner `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * self.channels);
        for c in 0..self.channels {
            for y in top..top + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Ok(Self {
            height,
            width,
            channels: self.channels,
            data,
            unclipped: self.unclipped,
        })
    }

    /// One of the eight flips/rotations of the square symmetry group.
    /// `op` bit 0 flips horizontally, bit 1 vertically, bit 2 transposes.
    pub fn dihedral(&self, op: u8) -> Self {
        let (h, w) = (self.height, self.width);
        let transpose = op & 4 != 0;
        let (oh, ow) = if transpose { (w, h) } else { (h, w) };
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            for y in 0..oh {
                for x in 0..ow {
                    let (mut sy, mut sx) = if transpose { (x, y) } else { (y, x) };
                    if op & 1 != 0 {
                        sx = w - 1 - sx;
                    }
                    if op & 2 != 0 {
                        sy = h - 1 - sy;
                    }
                    data.push(self.get(c, sy, sx));
                }
            }
        }
        Self {
            height: oh,
            width: ow,
            channels: self.channels,
            data,
            unclipped: self.unclipped,
        }
    }

    pub(crate) fn map_values(&self, unclipped: bool, mut f: impl FnMut(usize, f32) -> f32) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().enumerate().map(|(i, v)| f(i, *v)).collect(),
            unclipped,
        }
    }
}

/// Clamps every value into `[0, 1]` and clears the unclipped marker.
pub fn clip01(x: &ImageBuffer) -> ImageBuffer {
    x.map_values(false, |_, v| v.clamp(0.0, 1.0))
}

/// Mean squared error between two same-sized images, in f64.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// `10 log10(1 / MSE)` for peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    if reference.unclipped || test.unclipped {
        return Err(Error::Data("PSNR needs clipped images; apply clip01 first".into()));
    }
    let err = mse(reference, test)?;
    if err == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / err).log10()).min(PSNR_CAP_DB))
}
