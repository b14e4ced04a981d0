use occsim_core::obs::PolylineBatch;
use occsim_core::safety::ConstantVelocity;
use occsim_core::scenario::{Mode, ScenarioKind};
use occsim_net::{EncoderInput, PolicyParams};
use occsim_rl::train::read_curve;
use occsim_rl::{train, PpoConfig, PpoLearner, RolloutBatch, TrainConfig, Transition, VecEnv};
use occsim_core::smp::BoundaryEnd;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(kind: ScenarioKind) -> TrainConfig {
    let mut cfg = TrainConfig::for_scenario(kind);
    cfg.hidden = 16;
    cfg.ppo = PpoConfig { num_envs: 2, batch_steps: 16, minibatch: 8, epochs: 2, total_steps: 16, ..PpoConfig::default() };
    cfg
}

#[test]
fn two_envs_for_eight_steps_give_sixteen_transitions() {
    let cfg = small_config(ScenarioKind::TIntersection);
    let params = PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(0));
    let mut envs = VecEnv::new(&cfg, 2, 0.0).unwrap();
    let batch = envs.collect(&params, 7, 8, 0.0, &ConstantVelocity);
    assert_eq!(batch.len(), 16);
    assert_eq!(batch.segments, vec![0..8, 8..16]);
    assert!(batch.transitions.iter().all(|t| t.snapshot == 7 && t.log_prob.is_finite()));
}

fn fingerprint(b: &RolloutBatch) -> Vec<(u64, u64, u64, bool)> {
    b.transitions.iter().map(|t| (t.raw_action[0].to_bits(), t.reward.to_bits(), t.value.to_bits(), t.done)).collect()
}

#[test]
fn collection_is_deterministic_for_a_fixed_seed() {
    let cfg = small_config(ScenarioKind::Crossroad);
    let params = PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(1));
    let run = || VecEnv::new(&cfg, 2, 0.5).unwrap().collect(&params, 0, 12, 0.5, &ConstantVelocity);
    let (a, b) = (run(), run());
    assert_eq!(fingerprint(&a), fingerprint(&b));
    assert_eq!(a.transitions[5].observation, b.transitions[5].observation);
}

#[test]
fn no_decision_advances_more_than_t_exec() {
    for t_exec in [0.1, 0.5, 1.0, 2.0] {
        let mut cfg = small_config(ScenarioKind::Overtake);
        cfg.t_exec = t_exec;
        let mut env = occsim_core::env::Env::new(cfg.env_config(), 3).unwrap();
        env.reset(Some(Mode::EarlyOncoming), 1.0);
        while !env.is_done() {
            let t0 = env.world().time();
            env.step(BoundaryEnd::new(9.0, 0.0), &ConstantVelocity);
            assert!(env.world().time() - t0 <= t_exec + 1e-9);
        }
    }
}

/// Synthetic batch with fixed observations and returns.
fn frozen_batch() -> RolloutBatch {
    let cfg = small_config(ScenarioKind::TIntersection);
    let params = PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(2));
    let mut envs = VecEnv::new(&cfg, 2, 0.0).unwrap();
    let mut batch = envs.collect(&params, 0, 16, 0.0, &ConstantVelocity);
    for (i, t) in batch.transitions.iter_mut().enumerate() {
        t.reward = if i % 3 == 0 { 1.0 } else { -0.2 };
    }
    batch
}

fn critic_loss(params: &PolicyParams, obs: &[&PolylineBatch], returns: &[f64]) -> f64 {
    let c = params.forward(&EncoderInput::from_batches(obs));
    c.values.iter().zip(returns).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / returns.len() as f64
}

#[test]
fn one_update_strictly_decreases_critic_loss_on_a_frozen_batch() {
    let batch = frozen_batch();
    let cfg = PpoConfig { epochs: 1, minibatch: batch.len(), ..PpoConfig::default() };
    let params = PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(2));
    let (_, returns) = batch.advantages(cfg.gamma, cfg.gae_lambda).unwrap();
    let obs: Vec<&PolylineBatch> = batch.transitions.iter().map(|t: &Transition| &t.observation).collect();
    let mut learner = PpoLearner::new(params.clone(), cfg, TrainConfig::default().env_config().action_bounds());
    let before = critic_loss(&learner.params, &obs, &returns);
    learner.update(&batch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let after = critic_loss(&learner.params, &obs, &returns);
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn mixed_snapshots_are_rejected() {
    let mut batch = frozen_batch();
    batch.transitions[3].snapshot = 99;
    let mut learner = PpoLearner::new(PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(2)), PpoConfig::default(), TrainConfig::default().env_config().action_bounds());
    assert!(learner.update(&batch, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn smoke_two_thousand_decisions_emit_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::for_scenario(ScenarioKind::Crossroad);
    cfg.hidden = 32;
    cfg.ppo = PpoConfig { batch_steps: 512, total_steps: 2000, ..PpoConfig::default() };
    cfg.checkpoint_every = 2;
    let out = train(&cfg, dir.path(), &ConstantVelocity, &mut |_| {}).unwrap();
    assert!(out.steps >= 2000);
    assert!(out.final_checkpoint.exists());
    assert!(std::fs::read_dir(dir.path().join("checkpoints")).unwrap().count() >= 1);
    let curve = read_curve(&dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.len(), out.curve.len());
    assert!(curve.iter().all(|l| l.mean_reward.is_finite() && l.critic_loss.is_finite()));
}

#[test]
fn empty_road_sanity_task_is_learned_within_fifty_thousand_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::for_scenario(ScenarioKind::TIntersection);
    cfg.scenario.modes = vec![Mode::None];
    cfg.hidden = 32;
    cfg.ppo = PpoConfig { batch_steps: 1024, total_steps: 50_000, ..PpoConfig::default() };
    cfg.checkpoint_every = 1000;
    let out = train(&cfg, dir.path(), &ConstantVelocity, &mut |_| {}).unwrap();
    let tail = &out.curve[out.curve.len() - 3..];
    let success = tail.iter().map(|l| l.success_rate).sum::<f64>() / 3.0;
    assert!(success >= 0.95, "success {success:.3}");
    let collisions = tail.iter().map(|l| l.collision_rate).sum::<f64>();
    assert_eq!(collisions, 0.0);
}
