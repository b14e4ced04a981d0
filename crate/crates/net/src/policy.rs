use crate::encoder::{EncoderCache, EncoderInput, EncoderParams};
use crate::loss::clamp_log_std;
use crate::{Linear, Params, Tensor2};
use occsim_core::obs::PolylineBatch;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Shared encoder with a Gaussian actor head and a value head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub encoder: EncoderParams,
    pub actor1: Linear,
    pub actor2: Linear,
    /// `1 x 2`, state independent, clamped on use.
    pub log_std: Tensor2,
    pub critic1: Linear,
    pub critic2: Linear,
}

/// Forward activations of both heads.
#[derive(Debug, Clone)]
pub struct PolicyCache {
    pub encoder: EncoderCache,
    pub actor_hidden: Tensor2,
    pub critic_hidden: Tensor2,
    /// `B x 2`
    pub mu: Tensor2,
    pub values: Vec<f64>,
}

impl PolicyCache {
    pub fn mean(&self, b: usize) -> [f64; 2] {
        [self.mu.get(b, 0), self.mu.get(b, 1)]
    }
}

impl PolicyParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            encoder: EncoderParams::zeros(hidden),
            actor1: Linear::zeros(hidden, hidden),
            actor2: Linear::zeros(hidden, 2),
            log_std: Tensor2::zeros(1, 2),
            critic1: Linear::zeros(hidden, hidden),
            critic2: Linear::zeros(hidden, 1),
        }
    }

    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        let relu_gain = 2f64.sqrt();
        Self {
            encoder: EncoderParams::init(hidden, rng),
            actor1: Linear::init(hidden, hidden, relu_gain, rng),
            actor2: Linear::init(hidden, 2, 0.01, rng),
            log_std: Tensor2::zeros(1, 2),
            critic1: Linear::init(hidden, hidden, relu_gain, rng),
            critic2: Linear::init(hidden, 1, 1.0, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden()
    }

    pub fn log_std(&self) -> [f64; 2] {
        [clamp_log_std(self.log_std.get(0, 0)), clamp_log_std(self.log_std.get(0, 1))]
    }

    pub fn std(&self) -> [f64; 2] {
        self.log_std().map(f64::exp)
    }

    pub fn log_std_param(&self) -> [f64; 2] {
        [self.log_std.get(0, 0), self.log_std.get(0, 1)]
    }

    pub fn forward(&self, input: &EncoderInput) -> PolicyCache {
        let encoder = self.encoder.forward(input);
        let mut actor_hidden = self.actor1.forward(&encoder.global);
        actor_hidden.relu_inplace();
        let mu = self.actor2.forward(&actor_hidden);
        let mut critic_hidden = self.critic1.forward(&encoder.global);
        critic_hidden.relu_inplace();
        let values = self.critic2.forward(&critic_hidden).data().to_vec();
        PolicyCache { encoder, actor_hidden, critic_hidden, mu, values }
    }

    pub fn forward_batches(&self, batches: &[&PolylineBatch]) -> PolicyCache {
        self.forward(&EncoderInput::from_batches(batches))
    }

    /// Gradients of a loss given its partials with respect to the actor mean
    /// (`B x 2`), the log-std parameters and the values.
    pub fn backward(
        &self,
        input: &EncoderInput,
        cache: &PolicyCache,
        d_mu: Option<&Tensor2>,
        d_log_std: [f64; 2],
        d_values: Option<&[f64]>,
    ) -> PolicyParams {
        let mut grads = self.zeros_like();
        let mut d_global = Tensor2::zeros(cache.encoder.global.rows(), self.hidden());
        if let Some(d_mu) = d_mu {
            let mut dh = self.actor2.backward(&cache.actor_hidden, d_mu, &mut grads.actor2);
            dh.relu_mask(&cache.actor_hidden);
            d_global.add_assign(&self.actor1.backward(&cache.encoder.global, &dh, &mut grads.actor1));
        }
        if let Some(dv) = d_values {
            let dv = Tensor2::from_vec(dv.len(), 1, dv.to_vec()).expect("one value per row");
            let mut dh = self.critic2.backward(&cache.critic_hidden, &dv, &mut grads.critic2);
            dh.relu_mask(&cache.critic_hidden);
            d_global.add_assign(&self.critic1.backward(&cache.encoder.global, &dh, &mut grads.critic1));
        }
        grads.log_std = Tensor2::from_vec(1, 2, d_log_std.to_vec()).expect("two entries");
        self.encoder.backward(input, &cache.encoder, &d_global, None, &mut grads.encoder);
        grads
    }

    /// Pre-squash action sample for row `b`.
    pub fn sample<R: Rng>(&self, cache: &PolicyCache, b: usize, rng: &mut R) -> [f64; 2] {
        let mu = cache.mean(b);
        let std = self.std();
        let n0: f64 = StandardNormal.sample(rng);
        let n1: f64 = StandardNormal.sample(rng);
        [mu[0] + std[0] * n0, mu[1] + std[1] * n1]
    }
}

impl Params for PolicyParams {
    fn tensors(&self) -> Vec<&Tensor2> {
        let mut v = self.encoder.tensor_refs();
        v.extend([
            &self.actor1.w,
            &self.actor1.b,
            &self.actor2.w,
            &self.actor2.b,
            &self.log_std,
            &self.critic1.w,
            &self.critic1.b,
            &self.critic2.w,
            &self.critic2.b,
        ]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut v = self.encoder.tensor_refs_mut();
        v.extend([
            &mut self.actor1.w,
            &mut self.actor1.b,
            &mut self.actor2.w,
            &mut self.actor2.b,
            &mut self.log_std,
            &mut self.critic1.w,
            &mut self.critic1.b,
            &mut self.critic2.w,
            &mut self.critic2.b,
        ]);
        v
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut v = EncoderParams::names("encoder.");
        v.extend(
            ["actor1.w", "actor1.b", "actor2.w", "actor2.b", "log_std", "critic1.w", "critic1.b", "critic2.w", "critic2.b"]
                .map(String::from),
        );
        v
    }
}
