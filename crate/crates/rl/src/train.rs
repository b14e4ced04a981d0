use crate::{PpoLearner, RlError, TrainConfig, VecEnv};
use occsim_core::safety::TrajectoryPredictor;
use occsim_core::scenario::EpisodeStatus;
use occsim_net::{Checkpoint, PolicyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub steps: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub risky_rate: f64,
    pub episodes: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub final_checkpoint: PathBuf,
    pub curve: Vec<IterationLog>,
    pub steps: usize,
}

pub fn checkpoint_of(params: &PolicyParams, cfg: &TrainConfig, iteration: usize, steps: usize) -> Checkpoint {
    let meta = serde_json::json!({ "config": cfg, "iteration": iteration, "steps": steps });
    Checkpoint::capture(params, "policy", cfg.hidden, meta)
}

/// Alternates collection and PPO updates until `ppo.total_steps` decisions
/// or a success-rate plateau. Writes `config.json`, `curve.csv`, periodic
/// checkpoints under `checkpoints/` and `policy_final.json` into `out_dir`.
pub fn train(
    cfg: &TrainConfig,
    out_dir: &Path,
    predictor: &dyn TrajectoryPredictor,
    on_iteration: &mut dyn FnMut(&IterationLog),
) -> Result<TrainOutcome, RlError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir.join("checkpoints"))?;
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let mut curve_writer = csv::Writer::from_path(out_dir.join("curve.csv")).map_err(csv_err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_1EA2);
    let params = PolicyParams::init(cfg.hidden, &mut rng);
    let mut learner = PpoLearner::new(params, cfg.ppo, cfg.env_config().action_bounds());
    let mut envs = VecEnv::new(cfg, cfg.ppo.num_envs, 0.0)?;
    let total = cfg.ppo.total_steps;
    let per_env = cfg.ppo.steps_per_env();
    let mut steps = 0;
    let mut curve = Vec::new();
    let mut iteration = 0;
    while steps < total {
        let progress = steps as f64 / total as f64;
        let batch = envs.collect(&learner.params, iteration as u64, per_env, progress, predictor);
        steps += batch.len();
        let stats = learner.update(&batch, &mut rng)?;
        let log = IterationLog {
            iteration,
            steps,
            mean_reward: batch.mean_reward(),
            success_rate: batch.status_rate(EpisodeStatus::Success),
            collision_rate: batch.status_rate(EpisodeStatus::Collision),
            risky_rate: batch.risky_rate(),
            episodes: batch.episodes.len(),
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            entropy: stats.entropy,
        };
        curve_writer.serialize(log).map_err(csv_err)?;
        curve_writer.flush()?;
        on_iteration(&log);
        curve.push(log);
        iteration += 1;
        if iteration % cfg.checkpoint_every == 0 {
            let path = out_dir.join("checkpoints").join(format!("policy_iter_{iteration:05}.json"));
            checkpoint_of(&learner.params, cfg, iteration, steps).save(&path)?;
        }
        if cfg.plateau_window.is_some_and(|w| plateaued(&curve, w)) {
            break;
        }
    }
    let final_checkpoint = out_dir.join("policy_final.json");
    checkpoint_of(&learner.params, cfg, iteration, steps).save(&final_checkpoint)?;
    Ok(TrainOutcome { params: learner.params, final_checkpoint, curve, steps })
}

/// True when the mean success rate of the last `window` iterations does not
/// exceed that of the window before it.
pub fn plateaued(curve: &[IterationLog], window: usize) -> bool {
    if window == 0 || curve.len() < 2 * window {
        return false;
    }
    let mean = |s: &[IterationLog]| s.iter().map(|l| l.success_rate).sum::<f64>() / s.len() as f64;
    let n = curve.len();
    mean(&curve[n - window..]) <= mean(&curve[n - 2 * window..n - window])
}

pub fn read_curve(path: &Path) -> Result<Vec<IterationLog>, RlError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> RlError {
    RlError::Io(std::io::Error::other(e))
}
