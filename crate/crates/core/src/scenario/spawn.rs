//! Hidden-agent placement in the ego's blind spot.

use super::config::{Interval, Mode, ScenarioConfig};
use super::layout::{Layout, Side};
use super::{CAR_LENGTH, CAR_WIDTH};
use crate::geom2d::Pose;
use crate::world::{agent_visible, AgentState, Role, WorldState, TICK};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnedAgent {
    pub lane: usize,
    pub s: f64,
    pub speed: f64,
    pub activation_tick: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpawnPlan {
    pub agents: Vec<SpawnedAgent>,
}

/// Candidate position on a spawn lane that is hidden from the ego.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnCell {
    /// Index into `Layout::spawn_lanes`.
    pub spawn_lane: usize,
    pub s: f64,
    /// Distance from the agent center to the visible-region boundary.
    pub edge_distance: f64,
}

/// Curriculum length scale: grows tenfold from progress 0 to 1.
pub fn curriculum_lambda(lambda0: f64, progress: f64) -> f64 {
    lambda0 * (1.0 + 9.0 * progress.clamp(0.0, 1.0))
}

fn probe_agent(layout: &Layout, lane: usize, s: f64) -> AgentState {
    let path = &layout.map.lanes[lane];
    AgentState {
        id: u32::MAX,
        pose: Pose::new(path.point_at(s), path.heading_at(s)),
        speed: 0.0,
        accel: 0.0,
        length: CAR_LENGTH,
        width: CAR_WIDTH,
        role: Role::Traffic,
        follower: None,
    }
}

/// Cells of the given spawn lanes where a car would be entirely hidden.
pub fn blind_spot_cells(world: &WorldState, layout: &Layout, spawn_lanes: &[usize], cell_size: f64) -> Vec<SpawnCell> {
    let vr = world.visible_region();
    let mut out = Vec::new();
    for &i in spawn_lanes {
        let sl = &layout.spawn_lanes[i];
        let n = ((sl.s_range.hi - sl.s_range.lo) / cell_size).floor() as usize;
        for k in 0..n {
            let s = sl.s_range.lo + (k as f64 + 0.5) * cell_size;
            let probe = probe_agent(layout, sl.lane, s);
            if agent_visible(&probe, vr) {
                continue;
            }
            if world.agents.iter().any(|a| a.footprint().inflated(1.0, 0.0).intersects(&probe.footprint())) {
                continue;
            }
            out.push(SpawnCell { spawn_lane: i, s, edge_distance: vr.boundary_distance(probe.pose.position) });
        }
    }
    out
}

/// Draws one cell. With probability `progress` the draw is uniform; otherwise
/// cells are weighted by `exp(-edge_distance / lambda(progress))`.
pub fn sample_cell<R: Rng + ?Sized>(cells: &[SpawnCell], lambda0: f64, progress: f64, rng: &mut R) -> Option<usize> {
    if cells.is_empty() {
        return None;
    }
    if rng.random::<f64>() < progress {
        return Some(rng.random_range(0..cells.len()));
    }
    let lambda = curriculum_lambda(lambda0, progress);
    let weights: Vec<f64> = cells.iter().map(|c| (-c.edge_distance / lambda).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return Some(i);
        }
    }
    Some(cells.len() - 1)
}

fn sides_for(mode: Mode) -> &'static [Side] {
    match mode {
        Mode::None => &[],
        Mode::EarlyOncoming | Mode::LateOncoming => &[Side::Oncoming],
        Mode::Left => &[Side::Left],
        Mode::Right => &[Side::Right],
        Mode::Both => &[Side::Right, Side::Left],
    }
}

fn entry_window(mode: Mode, entry: Interval) -> Interval {
    match mode {
        Mode::EarlyOncoming => Interval::new(entry.lo, entry.mid()),
        Mode::LateOncoming => Interval::new(entry.mid(), entry.hi),
        _ => entry,
    }
}

/// Places hidden agents for `mode`. Every agent starts outside the current
/// visible region; an empty blind spot yields an empty plan.
pub fn spawn_hidden_agents<R: Rng + ?Sized>(
    world: &WorldState,
    layout: &Layout,
    cfg: &ScenarioConfig,
    mode: Mode,
    progress: f64,
    rng: &mut R,
) -> SpawnPlan {
    let sides = sides_for(mode);
    if sides.is_empty() {
        return SpawnPlan::default();
    }
    let [lo, hi] = cfg.spawn.count;
    let count = rng.random_range(lo..=hi).max(sides.len());
    let lane_of = |side: Side| layout.spawn_lanes.iter().position(|l| l.side == side);
    let entry = entry_window(mode, cfg.spawn.entry_time);
    let mut plan = SpawnPlan::default();
    for k in 0..count {
        let side = if k < sides.len() { sides[k] } else { sides[rng.random_range(0..sides.len())] };
        let Some(sl_idx) = lane_of(side) else { continue };
        let sl = &layout.spawn_lanes[sl_idx];
        let cells: Vec<SpawnCell> = blind_spot_cells(world, layout, &[sl_idx], cfg.spawn.cell_size)
            .into_iter()
            .filter(|c| plan.agents.iter().all(|a| a.lane != sl.lane || (a.s - c.s).abs() >= CAR_LENGTH + 2.0))
            .collect();
        let Some(ci) = sample_cell(&cells, cfg.spawn.curriculum_lambda0, progress, rng) else { continue };
        let s = cells[ci].s;
        let speed = cfg.spawn.speed.sample(rng);
        let entry_time = entry.sample(rng);
        let travel = (sl.conflict_s - s - 0.5 * CAR_LENGTH).max(0.0) / speed;
        let activation = (entry_time - travel).max(0.0);
        plan.agents.push(SpawnedAgent { lane: sl.lane, s, speed, activation_tick: (activation / TICK).round() as u64 });
    }
    plan
}
