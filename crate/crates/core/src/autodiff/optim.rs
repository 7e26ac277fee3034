use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 3e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// Adam with decoupled weight decay. Moments are kept per parameter in the
/// same order as the [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamSet, config: AdamWConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.numel()]).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Dimension { expected: params.len(), found: grads.len() });
        }
        for id in params.ids() {
            let n = params.get(id).numel();
            if grads.get(id).len() != n || self.m[id.0].len() != n {
                return Err(Error::Dimension { expected: n, found: grads.get(id).len() });
            }
        }
        self.step += 1;
        let AdamWConfig { lr, beta1, beta2, eps, weight_decay } = self.config;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(beta1, t);
        let bc2 = 1.0 - libm::pow(beta2, t);
        for id in params.ids() {
            let g = grads.get(id);
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            for (k, p) in params.get_mut(id).data_mut().iter_mut().enumerate() {
                *p -= lr * weight_decay * *p;
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *p -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn single(p: f64) -> (ParamSet, crate::autodiff::ParamId) {
        let mut params = ParamSet::new();
        let id = params.add("p", Tensor::vector(vec![p]));
        (params, id)
    }

    #[test]
    fn zero_grad_zero_decay_is_noop() {
        let (mut params, id) = single(1.5);
        let mut opt = AdamW::new(&params, AdamWConfig { weight_decay: 0.0, ..Default::default() });
        let g = Gradients::zeros_like(&params);
        opt.step(&mut params, &g).unwrap();
        assert_eq!(params.get(id).data(), &[1.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut params, id) = single(1.0);
        let cfg = AdamWConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 };
        let mut opt = AdamW::new(&params, cfg);
        let mut g = Gradients::zeros_like(&params);
        g.get_mut(id)[0] = 1.0;
        opt.step(&mut params, &g).unwrap();
        // m_hat = v_hat = 1, so the update is lr / (1 + eps).
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params.get(id).data()[0] - expected).abs() < 1e-15);
        assert!((params.get(id).data()[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decoupled_decay_with_zero_grad() {
        let (mut params, id) = single(2.0);
        let cfg = AdamWConfig { lr: 0.01, weight_decay: 0.5, ..Default::default() };
        let mut opt = AdamW::new(&params, cfg);
        let g = Gradients::zeros_like(&params);
        opt.step(&mut params, &g).unwrap();
        assert_eq!(params.get(id).data()[0], 2.0 - 0.01 * 0.5 * 2.0);
    }

    #[test]
    fn mismatched_grads_rejected() {
        let (mut params, _) = single(2.0);
        let mut opt = AdamW::new(&params, AdamWConfig::default());
        let other = ParamSet::new();
        assert!(opt.step(&mut params, &Gradients::zeros_like(&other)).is_err());
    }
}
