use crate::{RlError, TrainConfig};
use occsim_core::obs::{observe, ObsConfig, PolylineBatch};
use occsim_core::smp::{map_action, ActionBounds, BoundaryEnd};
use occsim_core::world::WorldState;
use occsim_net::loss::action_log_prob;
use occsim_net::{Checkpoint, PolicyParams};
use rand::Rng;
use std::path::Path;

/// One policy decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub raw: [f64; 2],
    pub end: BoundaryEnd,
    pub log_prob: f64,
    pub value: f64,
}

/// A trained policy together with how it observes and acts.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    pub params: PolicyParams,
    pub obs: ObsConfig,
    pub bounds: ActionBounds,
}

impl PolicyAgent {
    /// Loads a policy checkpoint written by training; its metadata carries
    /// the training config.
    pub fn from_checkpoint(path: &Path) -> Result<(Self, TrainConfig), RlError> {
        let ck = Checkpoint::load(path)?;
        let cfg: TrainConfig = serde_json::from_value(ck.meta["config"].clone())?;
        let mut params = PolicyParams::zeros(ck.hidden);
        ck.restore("policy", &mut params)?;
        let bounds = cfg.env_config().action_bounds();
        Ok((Self { params, obs: cfg.obs, bounds }, cfg))
    }

    pub fn observe(&self, world: &WorldState) -> PolylineBatch {
        observe(world, &self.obs)
    }

    /// Samples from the policy, or takes the squashed mean when `rng` is
    /// `None`.
    pub fn decide<R: Rng>(&self, obs: &PolylineBatch, rng: Option<&mut R>) -> Decision {
        let cache = self.params.forward_batches(&[obs]);
        let raw = match rng {
            Some(r) => self.params.sample(&cache, 0, r),
            None => cache.mean(0),
        };
        Decision {
            raw,
            end: map_action(raw, &self.bounds),
            log_prob: action_log_prob(raw, cache.mean(0), self.params.log_std(), &self.bounds),
            value: cache.values[0],
        }
    }
}
