use crate::RlError;
use occsim_core::env::EnvConfig;
use occsim_core::obs::ObsConfig;
use occsim_core::safety::{RewardConfig, RssParams};
use occsim_core::scenario::{ScenarioConfig, ScenarioKind};
use occsim_core::smp::FeasibilityLimits;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub ent_coef: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Decision steps per iteration, summed over envs.
    pub batch_steps: usize,
    pub num_envs: usize,
    pub max_grad_norm: f64,
    pub total_steps: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            ent_coef: 0.01,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            epochs: 4,
            minibatch: 256,
            batch_steps: 2048,
            num_envs: 8,
            max_grad_norm: 0.5,
            total_steps: 2_000_000,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Config(m.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps <= 0.5) {
            return bad("clip_eps must lie in (0, 0.5]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0 && self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if self.num_envs == 0 || self.batch_steps < self.num_envs || self.minibatch == 0 || self.epochs == 0 {
            return bad("num_envs, batch_steps, minibatch and epochs must be positive with batch_steps >= num_envs");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.max_grad_norm > 0.0) {
            return bad("learning rates and max_grad_norm must be positive");
        }
        Ok(())
    }

    pub fn steps_per_env(&self) -> usize {
        self.batch_steps / self.num_envs
    }
}

/// Everything a training run depends on. JSON files may omit any field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scenario: ScenarioConfig,
    pub t_exec: f64,
    /// `None` disables the safety mechanism.
    pub safety: Option<RssParams>,
    pub reward: RewardConfig,
    pub obs: ObsConfig,
    pub ppo: PpoConfig,
    pub hidden: usize,
    pub seed: u64,
    /// Iterations between periodic checkpoints.
    pub checkpoint_every: usize,
    /// Stop early once the success rate, averaged over this many
    /// iterations, fails to improve on the previous window.
    pub plateau_window: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_scenario(ScenarioKind::TIntersection)
    }
}

impl TrainConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        Self {
            scenario: ScenarioConfig::preset(kind),
            t_exec: 1.0,
            safety: Some(RssParams::loose()),
            reward: RewardConfig::default(),
            obs: ObsConfig::default(),
            ppo: PpoConfig::default(),
            hidden: occsim_net::HIDDEN,
            seed: 0,
            checkpoint_every: 10,
            plateau_window: None,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            scenario: self.scenario.clone(),
            t_exec: self.t_exec,
            safety: self.safety,
            reward: self.reward,
            limits: FeasibilityLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        self.env_config().validate()?;
        self.ppo.validate()?;
        if self.hidden == 0 || self.checkpoint_every == 0 {
            return Err(RlError::Config("hidden and checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, RlError> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
