use crate::policy::{Driver, PolicyKind};
use anyhow::Result;
use occsim_core::env::{Env, EnvConfig, TickSample};
use occsim_core::safety::{check_primitive, predict, Outcome, TrajectoryPredictor, PREDICTION_STEPS};
use occsim_core::scenario::{EpisodeStatus, Mode, ScenarioKind};
use occsim_core::world::{AgentId, WorldState};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: AgentId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub stopping: bool,
    pub vr_vertices: usize,
    /// Every agent but the ego.
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub tick: u64,
    pub v_xe: f64,
    pub d_ye: f64,
    pub outcome: Outcome,
    pub reward: f64,
    /// Wall clock from observation to safety verdict.
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub policy: PolicyKind,
    pub mode: Mode,
    pub status: EpisodeStatus,
    /// Simulated seconds.
    pub duration: f64,
    /// Mean ego speed over the episode's ticks.
    pub mean_speed: f64,
    pub ticks: Vec<TickRecord>,
    pub decisions: Vec<DecisionRecord>,
}

/// Suite-level metrics. Rates are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub policy: PolicyKind,
    pub scenario: ScenarioKind,
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub off_road_rate: f64,
    /// Mean speed over the ticks of successful episodes, m/s.
    pub mean_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub policy: PolicyKind,
    pub scenario: ScenarioKind,
    pub decisions: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

/// Mode of each of `n` episodes, cycling through `modes` so counts differ
/// by at most one.
pub fn stratified_modes(modes: &[Mode], n: usize) -> Vec<Mode> {
    (0..n).map(|i| modes[i % modes.len()]).collect()
}

fn tick_record(world: &WorldState, sample: &TickSample) -> TickRecord {
    TickRecord {
        tick: sample.tick,
        x: sample.pose.position.x,
        y: sample.pose.position.y,
        heading: sample.pose.heading,
        speed: sample.speed,
        stopping: sample.stopping,
        vr_vertices: world.visible_region().len(),
        agents: (1..world.agents.len())
            .map(|i| {
                let a = &world.agents[i];
                AgentRecord {
                    id: a.id,
                    x: a.pose.position.x,
                    y: a.pose.position.y,
                    heading: a.pose.heading,
                    speed: a.speed,
                    visible: world.is_visible(i),
                }
            })
            .collect(),
    }
}

/// Runs one episode. Latency covers observe, act, primitive solve and the
/// first safety check of the decision.
pub fn run_episode(
    driver: &Driver,
    env: &mut Env,
    seed: u64,
    mode: Mode,
    predictor: &dyn TrajectoryPredictor,
) -> EpisodeRecord {
    env.reset_with_seed(seed, Some(mode), 1.0);
    let ego = env.world().ego();
    let ego_size = (ego.length, ego.width);
    let t0 = env.world().time();
    let mut ticks = vec![tick_record(
        env.world(),
        &TickSample { tick: env.world().tick, pose: ego.pose, speed: ego.speed, stopping: false },
    )];
    let mut decisions = Vec::new();
    while !env.is_done() {
        let start = Instant::now();
        let end = driver.decide(env);
        let prim = env.solve(&end);
        if let Some(params) = env.config().safety {
            let preds = predict(env.world(), predictor, PREDICTION_STEPS);
            std::hint::black_box(check_primitive(&env.plan_from(&prim, 0), ego_size, &preds, &params));
        }
        let latency_ms = start.elapsed().as_secs_f64() * 1e3;
        let tick = env.world().tick;
        let out = env.step_observed(end, predictor, &mut |w, s| ticks.push(tick_record(w, s)));
        decisions.push(DecisionRecord {
            tick,
            v_xe: end.v_xe,
            d_ye: end.d_ye,
            outcome: out.verdict.outcome,
            reward: out.reward,
            latency_ms,
        });
    }
    let moving = &ticks[1..];
    let mean_speed = moving.iter().map(|t| t.speed).sum::<f64>() / moving.len().max(1) as f64;
    EpisodeRecord {
        seed,
        scenario: env.config().scenario.kind,
        policy: driver.kind(),
        mode,
        status: env.status(),
        duration: env.world().time() - t0,
        mean_speed,
        ticks,
        decisions,
    }
}

/// `n` stratified episodes with seeds `seed_base..seed_base + n`.
pub fn evaluate(
    driver: &Driver,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed_base: u64,
    predictor: &dyn TrajectoryPredictor,
) -> Result<Vec<EpisodeRecord>> {
    let mut env = Env::new(env_cfg.clone(), seed_base)?;
    let modes = stratified_modes(&env_cfg.scenario.modes, episodes);
    Ok(modes
        .into_iter()
        .enumerate()
        .map(|(i, mode)| run_episode(driver, &mut env, seed_base + i as u64, mode, predictor))
        .collect())
}

/// Summary over `records`, which must share one policy and scenario.
pub fn summarize(records: &[EpisodeRecord]) -> Option<MetricsSummary> {
    let first = records.first()?;
    let n = records.len() as f64;
    let rate = |s: EpisodeStatus| 100.0 * records.iter().filter(|r| r.status == s).count() as f64 / n;
    let (mut speed, mut ticks) = (0.0, 0usize);
    for r in records.iter().filter(|r| r.status == EpisodeStatus::Success) {
        speed += r.ticks[1..].iter().map(|t| t.speed).sum::<f64>();
        ticks += r.ticks.len() - 1;
    }
    Some(MetricsSummary {
        policy: first.policy,
        scenario: first.scenario,
        episodes: records.len(),
        success_rate: rate(EpisodeStatus::Success),
        collision_rate: rate(EpisodeStatus::Collision),
        timeout_rate: rate(EpisodeStatus::Timeout),
        off_road_rate: rate(EpisodeStatus::OffRoad),
        mean_speed: if ticks == 0 { 0.0 } else { speed / ticks as f64 },
    })
}

pub fn latency(records: &[EpisodeRecord]) -> Option<LatencySummary> {
    let first = records.first()?;
    let mut ms: Vec<f64> = records.iter().flat_map(|r| r.decisions.iter().map(|d| d.latency_ms)).collect();
    if ms.is_empty() {
        return None;
    }
    ms.sort_by(f64::total_cmp);
    let p95 = ms[((ms.len() as f64 * 0.95).ceil() as usize).clamp(1, ms.len()) - 1];
    Some(LatencySummary {
        policy: first.policy,
        scenario: first.scenario,
        decisions: ms.len(),
        mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
        p95_ms: p95,
    })
}
