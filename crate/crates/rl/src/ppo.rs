use crate::{normalize, PpoConfig, RlError, RolloutBatch};
use occsim_core::smp::ActionBounds;
use occsim_net::loss::{mse, ppo_actor_loss};
use occsim_net::{clip_global_norm, Adam, AdamConfig, EncoderInput, Params, PolicyParams};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Policy parameters with separate actor and critic optimizers. Both step
/// the shared encoder.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub params: PolicyParams,
    pub config: PpoConfig,
    pub bounds: ActionBounds,
    actor_opt: Adam<PolicyParams>,
    critic_opt: Adam<PolicyParams>,
}

impl PpoLearner {
    pub fn new(params: PolicyParams, config: PpoConfig, bounds: ActionBounds) -> Self {
        let actor_opt = Adam::new(AdamConfig::with_lr(config.actor_lr), &params);
        let critic_opt = Adam::new(AdamConfig::with_lr(config.critic_lr), &params);
        Self { params, config, bounds, actor_opt, critic_opt }
    }

    /// Epochs of shuffled minibatches over `batch`; each minibatch takes an
    /// actor step, then a critic step, both from one forward pass.
    pub fn update<R: Rng>(&mut self, batch: &RolloutBatch, rng: &mut R) -> Result<UpdateStats, RlError> {
        if let Some(t) = batch.transitions.iter().find(|t| t.snapshot != batch.snapshot) {
            return Err(RlError::Config(format!("transition from snapshot {} in batch {}", t.snapshot, batch.snapshot)));
        }
        let c = self.config;
        let (mut adv, returns) = batch.advantages(c.gamma, c.gae_lambda)?;
        normalize(&mut adv);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut stats = UpdateStats::default();
        for _ in 0..c.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(c.minibatch) {
                let obs: Vec<_> = chunk.iter().map(|&i| &batch.transitions[i].observation).collect();
                let input = EncoderInput::from_batches(&obs);
                let raw: Vec<[f64; 2]> = chunk.iter().map(|&i| batch.transitions[i].raw_action).collect();
                let old: Vec<f64> = chunk.iter().map(|&i| batch.transitions[i].log_prob).collect();
                let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
                let r: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();

                let cache = self.params.forward(&input);
                let al = ppo_actor_loss(&cache.mu, self.params.log_std_param(), &raw, &old, &a, &self.bounds, c.clip_eps, c.ent_coef);
                if !al.loss.is_finite() {
                    return Err(RlError::NonFinite(format!("actor loss {}", al.loss)));
                }
                let (cl, dv) = mse(&cache.values, &r);
                if !cl.is_finite() {
                    return Err(RlError::NonFinite(format!("critic loss {cl}")));
                }
                let mut ga = self.params.backward(&input, &cache, Some(&al.grad_mu), al.grad_log_std, None);
                let mut gc = self.params.backward(&input, &cache, None, [0.0; 2], Some(&dv));
                clip_global_norm(&mut ga, c.max_grad_norm);
                clip_global_norm(&mut gc, c.max_grad_norm);
                self.actor_opt.step(&mut self.params, &ga)?;
                self.critic_opt.step(&mut self.params, &gc)?;

                stats.actor_loss += al.loss;
                stats.critic_loss += cl;
                stats.entropy += al.entropy;
                stats.approx_kl += al.approx_kl;
                stats.clip_fraction += al.clip_fraction;
                stats.minibatches += 1;
            }
        }
        let k = stats.minibatches.max(1) as f64;
        stats.actor_loss /= k;
        stats.critic_loss /= k;
        stats.entropy /= k;
        stats.approx_kl /= k;
        stats.clip_fraction /= k;
        self.params.ensure_finite()?;
        Ok(stats)
    }
}
