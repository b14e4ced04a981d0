use crate::{NetError, Params};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers mirror the parameter layout.
#[derive(Debug, Clone)]
pub struct Adam<P: Params> {
    pub config: AdamConfig,
    m: P,
    v: P,
    t: u64,
}

impl<P: Params> Adam<P> {
    pub fn new(config: AdamConfig, like: &P) -> Self {
        Self { config, m: like.zeros_like(), v: like.zeros_like(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Non-finite gradients leave parameters and state untouched.
    pub fn step(&mut self, params: &mut P, grads: &P) -> Result<(), NetError> {
        grads.ensure_finite()?;
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let iter = params.tensors_mut().into_iter().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, g), m), v) in iter {
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                p[i] -= c.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm<P: Params>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale_all(max_norm / norm);
    }
    norm
}
