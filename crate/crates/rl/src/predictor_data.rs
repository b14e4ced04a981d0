//! Auto-labeled motion data for the learned predictor: observations are
//! logged every tick and labeled with the agents' actual future positions.

use crate::RlError;
use occsim_core::baselines::{blind_planner, BlindParams};
use occsim_core::env::{Env, EnvConfig};
use occsim_core::geom2d::Vec2;
use occsim_core::obs::{observe, ObsConfig};
use occsim_core::safety::ConstantVelocity;
use occsim_core::world::{AgentId, TICK};
use occsim_net::loss::mse;
use occsim_net::predictor::{agent_polyline_index, sample_input, PredictorSample};
use occsim_net::{clip_global_norm, Adam, AdamConfig, PredictorParams, Tensor2, OFFSET_SCALE, PREDICTION_HORIZON};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Drives `episodes` episodes with the blind planner, one decision per
/// tick, and labels every visible agent with its next 2 s of motion.
pub fn collect_predictor_samples(env_cfg: &EnvConfig, obs: &ObsConfig, episodes: usize, seed: u64) -> Result<Vec<PredictorSample>, RlError> {
    let mut cfg = env_cfg.clone();
    cfg.t_exec = TICK;
    cfg.safety = None;
    let mut env = Env::new(cfg, seed)?;
    let mut out = Vec::new();
    for ep in 0..episodes {
        env.reset_with_seed(seed.wrapping_add(ep as u64), None, 1.0);
        // per tick: observation, ego pose, (agent id, polyline index, position)
        let mut log = Vec::new();
        let mut tracks: Vec<std::collections::HashMap<AgentId, Vec2>> = Vec::new();
        loop {
            let w = env.world();
            let batch = observe(w, obs);
            let visible: Vec<(AgentId, usize)> = (1..w.agents.len())
                .filter(|&i| w.is_visible(i))
                .filter_map(|i| agent_polyline_index(w, &batch, i).map(|p| (w.agents[i].id, p)))
                .collect();
            tracks.push(w.agents.iter().map(|a| (a.id, a.pose.position)).collect());
            log.push((batch, w.ego().pose, visible));
            if env.is_done() {
                break;
            }
            let end = blind_planner(env.world(), &env.ego_state(), &BlindParams::default());
            env.step(end, &ConstantVelocity);
        }
        for (t, (batch, ego, visible)) in log.iter().enumerate() {
            if t + PREDICTION_HORIZON >= tracks.len() {
                break;
            }
            for &(id, target) in visible {
                let now = tracks[t][&id];
                let offsets = (1..=PREDICTION_HORIZON)
                    .map(|k| {
                        let d = ego.to_local(tracks[t + k][&id]) - ego.to_local(now);
                        [d.x, d.y]
                    })
                    .collect();
                out.push(PredictorSample { observation: batch.clone(), target, offsets });
            }
        }
    }
    Ok(out)
}

/// Minibatch Adam on mean squared offset error.
pub fn train_predictor(samples: &[PredictorSample], hidden: usize, epochs: usize, lr: f64, seed: u64) -> Result<PredictorParams, RlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PredictorParams::init(hidden, &mut rng);
    let mut opt = Adam::new(AdamConfig::with_lr(lr), &params);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(64) {
            let batch: Vec<&PredictorSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (input, targets) = sample_input(&batch);
            let cache = params.forward(&input, &targets);
            let target: Vec<f64> =
                batch.iter().flat_map(|s| s.offsets.iter().flat_map(|o| [o[0] / OFFSET_SCALE, o[1] / OFFSET_SCALE])).collect();
            let (loss, g) = mse(cache.out.data(), &target);
            if !loss.is_finite() {
                return Err(RlError::NonFinite(format!("predictor loss {loss}")));
            }
            let d_out = Tensor2::from_vec(cache.out.rows(), cache.out.cols(), g)?;
            let mut grads = params.backward(&input, &targets, &cache, &d_out);
            clip_global_norm(&mut grads, 1.0);
            opt.step(&mut params, &grads)?;
        }
    }
    Ok(params)
}

/// Average displacement error in meters.
pub fn average_displacement(params: &PredictorParams, samples: &[PredictorSample]) -> f64 {
    let mut total = 0.0;
    for chunk in samples.chunks(256) {
        let refs: Vec<&PredictorSample> = chunk.iter().collect();
        let (input, targets) = sample_input(&refs);
        let cache = params.forward(&input, &targets);
        for (b, s) in chunk.iter().enumerate() {
            let pred = cache.offsets(b);
            total += pred.iter().zip(&s.offsets).map(|(p, o)| p.distance(Vec2::new(o[0], o[1]))).sum::<f64>() / pred.len() as f64;
        }
    }
    total / samples.len().max(1) as f64
}

/// Average displacement error of constant-velocity extrapolation, read off
/// the last two history nodes of each target polyline.
pub fn constant_velocity_displacement(samples: &[PredictorSample]) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let pl = s.observation.valid_polylines().nth(s.target).expect("target polyline");
        let v = match pl.nodes.len() {
            0 | 1 => Vec2::ZERO,
            n => {
                let (a, b) = (pl.nodes[n - 2], pl.nodes[n - 1]);
                Vec2::new(b[0] - a[0], b[1] - a[1]) * (1.0 / (b[4] - a[4]))
            }
        };
        total += s
            .offsets
            .iter()
            .enumerate()
            .map(|(k, o)| (v * ((k + 1) as f64 * TICK)).distance(Vec2::new(o[0], o[1])))
            .sum::<f64>()
            / s.offsets.len() as f64;
    }
    total / samples.len().max(1) as f64
}
