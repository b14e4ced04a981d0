//! Benchmark scenarios, hidden-agent spawning and episode termination.

mod config;
mod layout;
mod spawn;

pub use config::{Interval, Mode, ScenarioConfig, ScenarioKind, SpawnParams};
pub use layout::{Conflict, Layout, Side, SpawnLane};
pub use spawn::{
    blind_spot_cells, curriculum_lambda, sample_cell, spawn_hidden_agents, SpawnCell, SpawnPlan, SpawnedAgent,
};
pub use crate::world::traffic_policy_step;

use crate::error::ConfigError;
use crate::geom2d::Pose;
use crate::world::{ego_collision, off_road, AgentState, LaneFollower, Role, TrafficBehavior, WorldState, TICK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const CAR_LENGTH: f64 = 4.5;
pub const CAR_WIDTH: f64 = 1.9;
pub const TRUCK_LENGTH: f64 = 12.0;
pub const TRUCK_WIDTH: f64 = 2.5;

/// Goal line on the ego route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub route_s: f64,
}

impl Goal {
    pub fn reached(&self, world: &WorldState) -> bool {
        world.ego_route().to_frenet(world.ego().pose.position).is_ok_and(|f| f.s >= self.route_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Success,
    Collision,
    Timeout,
    OffRoad,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }

    pub fn name(self) -> &'static str {
        match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Success => "success",
            EpisodeStatus::Collision => "collision",
            EpisodeStatus::Timeout => "timeout",
            EpisodeStatus::OffRoad => "off_road",
        }
    }
}

/// First matching condition in the order collision, off-road, success, timeout.
pub fn episode_status(world: &WorldState, goal: &Goal, timeout: f64) -> EpisodeStatus {
    if ego_collision(world).is_some() {
        EpisodeStatus::Collision
    } else if off_road(world) {
        EpisodeStatus::OffRoad
    } else if goal.reached(world) {
        EpisodeStatus::Success
    } else if world.tick > (timeout / TICK).round() as u64 {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    }
}

/// A freshly built episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub world: WorldState,
    pub goal: Goal,
    pub mode: Mode,
    pub plan: SpawnPlan,
    pub layout: Arc<Layout>,
}

fn lane_agent(layout: &Layout, id: u32, lane: usize, s: f64, speed: f64, activation_tick: u64, behavior: TrafficBehavior, size: (f64, f64)) -> AgentState {
    let path = &layout.map.lanes[lane];
    AgentState {
        id,
        pose: Pose::new(path.point_at(s), path.heading_at(s)),
        speed: if activation_tick == 0 { speed } else { 0.0 },
        accel: 0.0,
        length: size.0,
        width: size.1,
        role: Role::Traffic,
        follower: Some(LaneFollower { lane, s, desired_speed: speed, activation_tick, behavior }),
    }
}

/// Builds an episode. `mode = None` draws a mode from `cfg.modes`;
/// `progress` feeds the spawn curriculum.
pub fn build_episode<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    mode: Option<Mode>,
    progress: f64,
    rng: &mut R,
) -> Result<Episode, ConfigError> {
    cfg.validate()?;
    let mode = match mode {
        Some(m) if !ScenarioConfig::modes_for(cfg.kind).contains(&m) => {
            return Err(ConfigError::Invalid(format!("mode {} not available in {}", m.name(), cfg.kind)))
        }
        Some(m) => m,
        None => cfg.modes[rng.random_range(0..cfg.modes.len())],
    };
    let layout = Arc::new(Layout::generate(cfg, rng)?);
    let route = &layout.map.lanes[0];
    let ego = AgentState {
        id: 0,
        pose: Pose::new(route.point_at(layout.ego_start_s), route.heading_at(layout.ego_start_s)),
        speed: cfg.ego_speed,
        accel: 0.0,
        length: CAR_LENGTH,
        width: CAR_WIDTH,
        role: Role::Ego,
        follower: None,
    };
    let mut agents = vec![ego];
    if let Some((s, v)) = layout.truck {
        agents.push(lane_agent(&layout, 1, 0, s, v, 0, cfg.traffic, (TRUCK_LENGTH, TRUCK_WIDTH)));
    }
    let initial = WorldState::new(agents.clone(), layout.buildings.clone(), Arc::clone(&layout.map), cfg.sensor);
    let plan = spawn_hidden_agents(&initial, &layout, cfg, mode, progress, rng);
    for (k, a) in plan.agents.iter().enumerate() {
        agents.push(lane_agent(&layout, 10 + k as u32, a.lane, a.s, a.speed, a.activation_tick, cfg.traffic, (CAR_LENGTH, CAR_WIDTH)));
    }
    let world = WorldState::new(agents, layout.buildings.clone(), Arc::clone(&layout.map), cfg.sensor);
    Ok(Episode { world, goal: Goal { route_s: layout.goal_s }, mode, plan, layout })
}

/// Builds the episode determined by `cfg.seed`.
pub fn build(cfg: &ScenarioConfig) -> Result<(WorldState, Goal), ConfigError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ep = build_episode(cfg, None, 1.0, &mut rng)?;
    Ok((ep.world, ep.goal))
}
