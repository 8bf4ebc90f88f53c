use super::network::{NetworkParams, ParamGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one vector per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f32>> = params.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut NetworkParams, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    if !grads.congruent_with(params) || state.m.len() != grads.tensors().count() {
        return Err(Error::shape("gradients, parameters and optimizer state disagree"));
    }
    for (ti, g) in grads.tensors().enumerate() {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in tensor {ti} at index {i}"
            )));
        }
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = (1.0 - (beta1 as f64).powi(t)) as f32;
    let c2 = (1.0 - (beta2 as f64).powi(t)) as f32;
    for (((p, g), m), v) in params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Arch;
    use crate::rng::Rng;

    fn params() -> NetworkParams {
        let arch = Arch {
            depth: 2,
            width: 3,
            kernel: 3,
            channels: 1,
        };
        NetworkParams::init(arch, &mut Rng::new(1)).unwrap()
    }

    fn const_grads(p: &NetworkParams, g: f32) -> ParamGrads {
        let mut grads = ParamGrads::zeros_like(p);
        for l in &mut grads.layers {
            l.weights.fill(g);
            l.bias.fill(g);
        }
        grads
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut p = params();
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &ParamGrads::zeros_like(&before), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn constant_grad_step_tends_to_lr() {
        let cfg = AdamConfig {
            lr: 1e-3,
            ..Default::default()
        };
        let mut p = params();
        let mut st = AdamState::new(&p, cfg);
        let g = const_grads(&p, 0.37);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p.layers()[0].weights[0];
            adam_step(&mut p, &g, &mut st).unwrap();
            last = before - p.layers()[0].weights[0];
        }
        assert!((last - 1e-3).abs() < 1e-5, "{last}");
    }

    #[test]
    fn deterministic() {
        let p0 = params();
        let g = const_grads(&p0, -0.2);
        let run = || {
            let mut p = p0.clone();
            let mut st = AdamState::new(&p, AdamConfig::default());
            adam_step(&mut p, &g, &mut st).unwrap();
            adam_step(&mut p, &g, &mut st).unwrap();
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_grad_is_rejected() {
        let mut p = params();
        let mut g = ParamGrads::zeros_like(&p);
        g.layers[1].bias[0] = f32::NAN;
        let mut st = AdamState::new(&p, AdamConfig::default());
        let before = p.clone();
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(Error::Numeric(_))));
        assert_eq!(p, before);
        assert_eq!(st.t, 0);
    }
}
