//! Residual conv/ReLU stack: `xhat = y - R(y)`.

use std::fmt;
use std::str::FromStr;

use super::conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, Rng};
use crate::tensor::Tensor4;

/// Architecture descriptor of a DnCNN-style residual denoiser without
/// batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arch {
    /// Number of convolution layers.
    pub depth: usize,
    /// Hidden channel width.
    pub width: usize,
    pub kernel: usize,
    /// Image channels (1 = gray, 3 = RGB).
    pub channels: usize,
}

impl Arch {
    /// Desk-scale default.
    pub const DEFAULT: Arch = Arch {
        depth: 7,
        width: 32,
        kernel: 3,
        channels: 1,
    };

    /// Full DnCNN geometry (17 layers, 64 channels).
    pub const DNCNN: Arch = Arch {
        depth: 17,
        width: 64,
        kernel: 3,
        channels: 1,
    };

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::config(format!("degenerate architecture {self}")));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::config(format!("kernel size {} must be odd", self.kernel)));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|l| {
                let in_ch = if l == 0 { self.channels } else { self.width };
                let out_ch = if l + 1 == self.depth { self.channels } else { self.width };
                (in_ch, out_ch)
            })
            .collect()
    }

    /// Receptive field radius in pixels.
    pub fn radius(&self) -> usize {
        self.depth * (self.kernel / 2)
    }
}

impl Default for Arch {
    fn default() -> Self {
        Arch::DEFAULT
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dncnn-d{}-c{}-k{}-ch{}",
            self.depth, self.width, self.kernel, self.channels
        )
    }
}

impl FromStr for Arch {
    type Err = Error;

    /// Parses `dncnn-d<depth>-c<width>-k<kernel>-ch<channels>`, or the presets
    /// `default` and `dncnn17`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arch = match s {
            "default" => Arch::DEFAULT,
            "dncnn17" => Arch::DNCNN,
            _ => {
                let bad = || Error::config(format!("cannot parse architecture {s:?}"));
                let mut parts = s.split('-');
                if parts.next() != Some("dncnn") {
                    return Err(bad());
                }
                let mut field = |prefix: &str| -> Result<usize> {
                    parts
                        .next()
                        .and_then(|p| p.strip_prefix(prefix))
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(bad)
                };
                let arch = Arch {
                    depth: field("d")?,
                    width: field("c")?,
                    kernel: field("k")?,
                    channels: field("ch")?,
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                arch
            }
        };
        arch.validate()?;
        Ok(arch)
    }
}

/// Ordered layer parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Arch,
    layers: Vec<ConvLayer>,
}

/// Gradients shaped like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<ConvGrads>,
}

impl NetworkParams {
    /// All-zero parameters: the identity denoiser.
    pub fn zeros(arch: Arch) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(i, o)| ConvLayer::zeros(i, o, arch.kernel))
            .collect::<Result<_>>()?;
        Ok(Self { arch, layers })
    }

    /// He fan-in initialization for hidden layers; the last layer is zero so
    /// the untrained network is the identity map.
    pub fn init(arch: Arch, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let last = p.layers.len() - 1;
        for layer in &mut p.layers[..last] {
            let fan_in = (layer.in_ch * layer.kernel * layer.kernel) as f64;
            let std = (2.0 / fan_in).sqrt();
            for w in &mut layer.weights {
                *w = (rng.normal() * std) as f32;
            }
        }
        Ok(p)
    }

    /// Rebuilds parameters from flat tensors in [`Self::tensors`] order.
    pub fn from_tensors(arch: Arch, tensors: Vec<Vec<f32>>) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        if tensors.len() != 2 * p.layers.len() {
            return Err(Error::shape(format!(
                "{arch} needs {} tensors, got {}",
                2 * p.layers.len(),
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        for layer in &mut p.layers {
            let (w, b) = (it.next().unwrap(), it.next().unwrap());
            if w.len() != layer.weights.len() || b.len() != layer.bias.len() {
                return Err(Error::shape(format!("tensor sizes do not fit {arch}")));
            }
            if w.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite parameter".into()));
            }
            layer.weights = w;
            layer.bias = b;
        }
        Ok(p)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    /// Weight and bias slices, layer by layer.
    pub fn tensors(&self) -> impl Iterator<Item = &[f32]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f32>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    /// `(name, dims)` of every tensor, in [`Self::tensors`] order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (
                        format!("layer{i}.weight"),
                        vec![l.out_ch, l.in_ch, l.kernel, l.kernel],
                    ),
                    (format!("layer{i}.bias"), vec![l.out_ch]),
                ]
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(|t| t.len()).sum()
    }

    /// Hash of the exact parameter bits.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.num_params() * 4);
        for t in self.tensors() {
            for v in t {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        fnv1a(&bytes) ^ fnv1a(self.arch.to_string().as_bytes())
    }

    pub fn ensure_same_arch(&self, other: &NetworkParams) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::shape(format!(
                "architecture {} vs {}",
                self.arch, other.arch
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl ParamGrads {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| ConvGrads {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f32]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn congruent_with(&self, params: &NetworkParams) -> bool {
        self.layers.len() == params.layers.len()
            && self
                .layers
                .iter()
                .zip(&params.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

/// Activations recorded by [`network_forward`].
#[derive(Debug, Clone)]
pub struct Tape {
    digest: u64,
    arch: Arch,
    /// Layer inputs: the network input followed by each hidden ReLU output.
    inputs: Vec<Tensor4>,
}

impl Tape {
    pub fn arch(&self) -> Arch {
        self.arch
    }
}

fn check_input(params: &NetworkParams, y: &Tensor4) -> Result<()> {
    if y.shape().channels != params.arch.channels {
        return Err(Error::shape(format!(
            "{} expects {} image channels, got {}",
            params.arch,
            params.arch.channels,
            y.shape().channels
        )));
    }
    Ok(())
}

/// Runs the residual network. The returned tape is what
/// [`network_backward`] consumes.
pub fn network_forward(params: &NetworkParams, y: &Tensor4) -> Result<(Tensor4, Tape)> {
    check_input(params, y)?;
    let depth = params.layers.len();
    let mut inputs = Vec::with_capacity(depth);
    inputs.push(y.clone());
    let mut residual = None;
    for (l, layer) in params.layers.iter().enumerate() {
        let mut out = conv2d_forward(&inputs[l], layer)?;
        if l + 1 < depth {
            out.relu_inplace();
            inputs.push(out);
        } else {
            residual = Some(out);
        }
    }
    let xhat = y.sub(&residual.expect("depth >= 1"))?;
    if !xhat.is_finite() {
        return Err(Error::Numeric("network output is not finite".into()));
    }
    let tape = Tape {
        digest: params.digest(),
        arch: params.arch,
        inputs,
    };
    Ok((xhat, tape))
}

/// Gradient of a loss with respect to every parameter, given the loss
/// gradient with respect to the network output.
pub fn network_backward(
    params: &NetworkParams,
    tape: &Tape,
    grad_xhat: &Tensor4,
) -> Result<ParamGrads> {
    if tape.arch != params.arch || tape.digest != params.digest() {
        return Err(Error::StaleTape);
    }
    tape.inputs[0].ensure_same_shape(grad_xhat)?;
    // xhat = y - R(y)
    let mut grad = grad_xhat.scale(-1.0);
    let mut layers = Vec::with_capacity(params.layers.len());
    for l in (0..params.layers.len()).rev() {
        let input = &tape.inputs[l];
        let (g, gin) = conv2d_backward(input, &params.layers[l], &grad, l > 0)?;
        layers.push(g);
        if let Some(mut gin) = gin {
            for (gv, a) in gin.data_mut().iter_mut().zip(input.data()) {
                if *a <= 0.0 {
                    *gv = 0.0;
                }
            }
            grad = gin;
        }
    }
    layers.reverse();
    let grads = ParamGrads { layers };
    if !grads.is_finite() {
        return Err(Error::Numeric("gradient is not finite".into()));
    }
    Ok(grads)
}

/// `(1 - eps) * a + eps * b`, exact at `eps = 0` and `eps = 1`.
pub fn interpolate(a: &NetworkParams, b: &NetworkParams, eps: f32) -> Result<NetworkParams> {
    a.ensure_same_arch(b)?;
    let mut out = a.clone();
    let keep = 1.0 - eps;
    for (dst, src) in out.tensors_mut().zip(b.tensors()) {
        for (x, y) in dst.iter_mut().zip(src) {
            *x = keep * *x + eps * *y;
        }
    }
    Ok(out)
}
