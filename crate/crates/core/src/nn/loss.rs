//! Reconstruction losses. Values are accumulated in f64.

use crate::error::Result;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Mse,
    L1,
}

impl LossKind {
    pub fn eval(self, pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
        match self {
            LossKind::Mse => mse_loss(pred, target),
            LossKind::L1 => l1_loss(pred, target),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" | "l2" => Ok(LossKind::Mse),
            "l1" => Ok(LossKind::L1),
            other => Err(crate::Error::config(format!("unknown loss {other:?}"))),
        }
    }
}

/// Mean squared error and its gradient `2 (pred - target) / count`.
pub fn mse_loss(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    pred.ensure_same_shape(target)?;
    let n = pred.data().len();
    let scale = 2.0 / n as f32;
    let mut grad = Tensor4::zeros(pred.shape());
    let mut sum = 0.0f64;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += (d as f64) * (d as f64);
        *g = scale * d;
    }
    Ok((sum / n as f64, grad))
}

/// Mean absolute error; the subgradient is 0 at exact ties.
pub fn l1_loss(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    pred.ensure_same_shape(target)?;
    let n = pred.data().len();
    let step = 1.0 / n as f32;
    let mut grad = Tensor4::zeros(pred.shape());
    let mut sum = 0.0f64;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += (d as f64).abs();
        *g = if d > 0.0 {
            step
        } else if d < 0.0 {
            -step
        } else {
            0.0
        };
    }
    Ok((sum / n as f64, grad))
}
