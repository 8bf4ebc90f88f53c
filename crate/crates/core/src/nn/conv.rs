//! "Same"-padded 2-D convolution with stride 1, forward and backward.

use crate::error::{Error, Result};
use crate::exec;
use crate::tensor::{Shape4, Tensor4};

/// A single convolution layer. Weights are stored `(out_ch, in_ch, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::config(format!("kernel size {kernel} must be odd")));
        }
        if in_ch == 0 || out_ch == 0 {
            return Err(Error::config("layer channel counts must be positive"));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            weights: vec![0.0; out_ch * in_ch * kernel * kernel],
            bias: vec![0.0; out_ch],
        })
    }

    #[inline]
    pub fn weight_index(&self, o: usize, i: usize, dy: usize, dx: usize) -> usize {
        ((o * self.in_ch + i) * self.kernel + dy) * self.kernel + dx
    }

    fn pad(&self) -> isize {
        (self.kernel / 2) as isize
    }

    fn check_input(&self, input: Shape4) -> Result<()> {
        if input.channels != self.in_ch {
            return Err(Error::shape(format!(
                "layer expects {} input channels, got {}",
                self.in_ch, input.channels
            )));
        }
        Ok(())
    }
}

/// Gradients of one layer, same layout as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

/// `dst[y, x] += w * src[y + oy, x + ox]` over the overlap of the two planes.
#[inline]
fn shifted_axpy(dst: &mut [f32], src: &[f32], w: f32, h: usize, wd: usize, oy: isize, ox: isize) {
    let (hi, wi) = (h as isize, wd as isize);
    let y0 = (-oy).max(0);
    let y1 = (hi - oy).min(hi);
    let x0 = (-ox).max(0);
    let x1 = (wi - ox).min(wi);
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let d = (y * wi) as usize;
        let s = ((y + oy) * wi) as usize;
        let drow = &mut dst[d + x0 as usize..d + x1 as usize];
        let srow = &src[(s as isize + x0 + ox) as usize..(s as isize + x1 + ox) as usize];
        for (a, b) in drow.iter_mut().zip(srow) {
            *a += w * b;
        }
    }
}

/// `sum_{y,x} a[y, x] * b[y + oy, x + ox]` over the overlap.
#[inline]
fn shifted_dot(a: &[f32], b: &[f32], h: usize, wd: usize, oy: isize, ox: isize) -> f32 {
    let (hi, wi) = (h as isize, wd as isize);
    let y0 = (-oy).max(0);
    let y1 = (hi - oy).min(hi);
    let x0 = (-ox).max(0);
    let x1 = (wi - ox).min(wi);
    let mut acc = 0.0f32;
    if y0 >= y1 || x0 >= x1 {
        return acc;
    }
    for y in y0..y1 {
        let d = (y * wi) as usize;
        let s = ((y + oy) * wi) as usize;
        let arow = &a[d + x0 as usize..d + x1 as usize];
        let brow = &b[(s as isize + x0 + ox) as usize..(s as isize + x1 + ox) as usize];
        acc += dot(arow, brow);
    }
    acc
}

/// Fixed-order dot product with eight partial sums.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut lanes = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    let s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    s + tail
}

pub fn conv2d_forward(input: &Tensor4, layer: &ConvLayer) -> Result<Tensor4> {
    let s = input.shape();
    layer.check_input(s)?;
    let out_shape = Shape4::new(s.batch, layer.out_ch, s.height, s.width);
    let mut out = Tensor4::zeros(out_shape);
    let plane = s.plane();
    let pad = layer.pad();
    let k = layer.kernel;
    exec::for_each_chunk_mut(out.data_mut(), plane, |idx, dst| {
        let b = idx / layer.out_ch;
        let o = idx % layer.out_ch;
        dst.fill(layer.bias[o]);
        for i in 0..layer.in_ch {
            let src = input.plane(b, i);
            for dy in 0..k {
                for dx in 0..k {
                    let w = layer.weights[layer.weight_index(o, i, dy, dx)];
                    if w == 0.0 {
                        continue;
                    }
                    let (oy, ox) = (dy as isize - pad, dx as isize - pad);
                    shifted_axpy(dst, src, w, s.height, s.width, oy, ox);
                }
            }
        }
    });
    Ok(out)
}

/// Backward pass of [`conv2d_forward`]. Returns the parameter gradients and,
/// when `need_input_grad`, the gradient with respect to `input`.
pub fn conv2d_backward(
    input: &Tensor4,
    layer: &ConvLayer,
    grad_out: &Tensor4,
    need_input_grad: bool,
) -> Result<(ConvGrads, Option<Tensor4>)> {
    let s = input.shape();
    layer.check_input(s)?;
    let expect = Shape4::new(s.batch, layer.out_ch, s.height, s.width);
    if grad_out.shape() != expect {
        return Err(Error::shape(format!(
            "output gradient {} does not match {expect}",
            grad_out.shape()
        )));
    }
    let pad = layer.pad();
    let k = layer.kernel;
    let per_out = layer.in_ch * k * k;

    let per_channel: Vec<(Vec<f32>, f32)> = exec::map_range(layer.out_ch, |o| {
        let mut gw = vec![0.0f32; per_out];
        let mut gb = 0.0f32;
        for b in 0..s.batch {
            let go = grad_out.plane(b, o);
            gb += go.iter().sum::<f32>();
            for i in 0..layer.in_ch {
                let src = input.plane(b, i);
                for dy in 0..k {
                    for dx in 0..k {
                        let (oy, ox) = (dy as isize - pad, dx as isize - pad);
                        gw[(i * k + dy) * k + dx] +=
                            shifted_dot(go, src, s.height, s.width, oy, ox);
                    }
                }
            }
        }
        (gw, gb)
    });
    let mut weights = Vec::with_capacity(layer.weights.len());
    let mut bias = Vec::with_capacity(layer.out_ch);
    for (gw, gb) in per_channel {
        weights.extend_from_slice(&gw);
        bias.push(gb);
    }

    let grad_in = if need_input_grad {
        let mut gin = Tensor4::zeros(s);
        exec::for_each_chunk_mut(gin.data_mut(), s.plane(), |idx, dst| {
            let b = idx / layer.in_ch;
            let i = idx % layer.in_ch;
            for o in 0..layer.out_ch {
                let go = grad_out.plane(b, o);
                for dy in 0..k {
                    for dx in 0..k {
                        let w = layer.weights[layer.weight_index(o, i, dy, dx)];
                        if w == 0.0 {
                            continue;
                        }
                        let (oy, ox) = (dy as isize - pad, dx as isize - pad);
                        shifted_axpy(dst, go, w, s.height, s.width, -oy, -ox);
                    }
                }
            }
        });
        Some(gin)
    } else {
        None
    };
    Ok((ConvGrads { weights, bias }, grad_in))
}
