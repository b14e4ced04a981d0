use crate::{compute_gae, RlError, TrainConfig};
use occsim_core::env::Env;
use occsim_core::obs::{observe, ObsConfig, PolylineBatch};
use occsim_core::safety::{Outcome, TrajectoryPredictor};
use occsim_core::scenario::EpisodeStatus;
use occsim_core::smp::{map_action, ActionBounds, BoundaryEnd};
use occsim_net::loss::action_log_prob;
use occsim_net::PolicyParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: PolylineBatch,
    pub raw_action: [f64; 2],
    pub action: BoundaryEnd,
    /// Log-density of the squashed action under the collecting snapshot.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub snapshot: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub status: EpisodeStatus,
    pub episode_return: f64,
    pub decisions: usize,
}

/// Transitions of one collection phase, env-major.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub transitions: Vec<Transition>,
    /// Rows of each env's contiguous segment.
    pub segments: Vec<Range<usize>>,
    /// Value of each env's observation after its last step, 0 when done.
    pub bootstrap: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
    pub snapshot: u64,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Un-normalized advantages and returns, segment by segment.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), RlError> {
        let mut adv = Vec::with_capacity(self.len());
        let mut ret = Vec::with_capacity(self.len());
        for (seg, &boot) in self.segments.iter().zip(&self.bootstrap) {
            let tr = &self.transitions[seg.clone()];
            let rewards: Vec<f64> = tr.iter().map(|t| t.reward).collect();
            let mut values: Vec<f64> = tr.iter().map(|t| t.value).collect();
            values.push(boot);
            let dones: Vec<bool> = tr.iter().map(|t| t.done).collect();
            let (a, r) = compute_gae(&rewards, &values, &dones, gamma, lambda)?;
            adv.extend(a);
            ret.extend(r);
        }
        Ok((adv, ret))
    }

    pub fn mean_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum::<f64>() / self.len().max(1) as f64
    }

    pub fn risky_rate(&self) -> f64 {
        let risky = self.transitions.iter().filter(|t| t.outcome == Outcome::RiskyTerminated).count();
        risky as f64 / self.len().max(1) as f64
    }

    pub fn status_rate(&self, status: EpisodeStatus) -> f64 {
        let n = self.episodes.iter().filter(|e| e.status == status).count();
        n as f64 / self.episodes.len().max(1) as f64
    }
}

struct Worker {
    env: Env,
    rng: ChaCha8Rng,
    obs: PolylineBatch,
    episode_return: f64,
    decisions: usize,
}

/// Independent environments stepped in lockstep with one batched forward
/// pass per step.
pub struct VecEnv {
    workers: Vec<Worker>,
    obs_cfg: ObsConfig,
    bounds: ActionBounds,
}

/// Seed of env `i` derived from the run seed.
pub fn env_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((i as u64).wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(1))
}

impl VecEnv {
    pub fn new(cfg: &TrainConfig, num_envs: usize, progress: f64) -> Result<Self, RlError> {
        let env_cfg = cfg.env_config();
        let bounds = env_cfg.action_bounds();
        let mut workers = Vec::with_capacity(num_envs);
        for i in 0..num_envs {
            let seed = env_seed(cfg.seed, i);
            let mut env = Env::new(env_cfg.clone(), seed)?;
            env.reset(None, progress);
            let obs = observe(env.world(), &cfg.obs);
            workers.push(Worker { env, rng: ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5), obs, episode_return: 0.0, decisions: 0 });
        }
        Ok(Self { workers, obs_cfg: cfg.obs, bounds })
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Runs `steps_per_env` decisions in every env with a fixed snapshot.
    /// Finished episodes restart immediately at curriculum `progress`.
    pub fn collect(
        &mut self,
        params: &PolicyParams,
        snapshot: u64,
        steps_per_env: usize,
        progress: f64,
        predictor: &dyn TrajectoryPredictor,
    ) -> RolloutBatch {
        let n = self.workers.len();
        let mut per_env: Vec<Vec<Transition>> = (0..n).map(|_| Vec::with_capacity(steps_per_env)).collect();
        let mut episodes = Vec::new();
        let log_std = params.log_std();
        for _ in 0..steps_per_env {
            let cache = params.forward_batches(&self.workers.iter().map(|w| &w.obs).collect::<Vec<_>>());
            for (i, w) in self.workers.iter_mut().enumerate() {
                let raw = params.sample(&cache, i, &mut w.rng);
                let action = map_action(raw, &self.bounds);
                let log_prob = action_log_prob(raw, cache.mean(i), log_std, &self.bounds);
                let out = w.env.step(action, predictor);
                let done = w.env.is_done();
                w.episode_return += out.reward;
                w.decisions += 1;
                let observation = std::mem::replace(&mut w.obs, PolylineBatch::default());
                per_env[i].push(Transition {
                    observation,
                    raw_action: raw,
                    action,
                    log_prob,
                    reward: out.reward,
                    value: cache.values[i],
                    done,
                    outcome: out.verdict.outcome,
                    snapshot,
                });
                if done {
                    episodes.push(EpisodeSummary { status: w.env.status(), episode_return: w.episode_return, decisions: w.decisions });
                    w.episode_return = 0.0;
                    w.decisions = 0;
                    w.env.reset(None, progress);
                }
                w.obs = observe(w.env.world(), &self.obs_cfg);
            }
        }
        let last = params.forward_batches(&self.workers.iter().map(|w| &w.obs).collect::<Vec<_>>());
        let bootstrap = (0..n).map(|i| if per_env[i].last().is_some_and(|t| t.done) { 0.0 } else { last.values[i] }).collect();
        let mut transitions = Vec::with_capacity(n * steps_per_env);
        let mut segments = Vec::with_capacity(n);
        for seg in per_env {
            let start = transitions.len();
            transitions.extend(seg);
            segments.push(start..transitions.len());
        }
        RolloutBatch { transitions, segments, bootstrap, episodes, snapshot }
    }
}
