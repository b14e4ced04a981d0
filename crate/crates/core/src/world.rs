//! Simulation state, kinematic stepping, collisions and off-road checks.

use crate::geom2d::{
    point_in_polygon, visibility_polygon_oriented, OrientedBox, Polygon, Pose, ReferencePath, Vec2,
    VisibilityParams,
};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Arc;

/// Simulation tick in seconds; equals the primitive sampling step.
pub const TICK: f64 = 0.1;
/// History samples kept per agent (2 s).
pub const HISTORY_CAPACITY: usize = 20;

/// Deceleration used by the traffic gap rule.
pub const TRAFFIC_BRAKE: f64 = 4.0;
pub const TRAFFIC_STANDSTILL_GAP: f64 = 5.0;
const TRAFFIC_RECOVER_ACCEL: f64 = 2.0;

pub type AgentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Traffic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficBehavior {
    /// Tracks its desired speed and brakes for leaders in its lane.
    GapKeeping,
    /// Holds its speed regardless of other agents.
    ConstantVelocity,
}

/// Longitudinal point-mass motion along a map lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneFollower {
    pub lane: usize,
    pub s: f64,
    pub desired_speed: f64,
    /// Tick at which the agent starts moving; it holds position before.
    pub activation_tick: u64,
    pub behavior: TrafficBehavior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub pose: Pose,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub width: f64,
    pub role: Role,
    pub follower: Option<LaneFollower>,
}

impl AgentState {
    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.pose, self.length, self.width)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.pose.heading) * self.speed
    }

    pub fn is_active(&self, tick: u64) -> bool {
        self.follower.is_none_or(|f| tick >= f.activation_tick)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistorySample {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub psi: f64,
    pub tick: u64,
    /// Whether the agent was inside the ego's visible region at this tick.
    pub visible: bool,
}

impl HistorySample {
    pub fn time(&self) -> f64 {
        self.tick as f64 * TICK
    }
}

/// Fixed-capacity ring of per-tick samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryBuffer {
    samples: VecDeque<HistorySample>,
    capacity: usize,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { samples: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, s: HistorySample) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &HistorySample> + ExactSizeIterator {
        self.samples.iter()
    }

    pub fn latest(&self) -> Option<&HistorySample> {
        self.samples.back()
    }

    /// Trailing run of samples taken while visible, oldest first.
    pub fn visible_suffix(&self) -> Vec<HistorySample> {
        let n = self.samples.iter().rev().take_while(|s| s.visible).count();
        self.samples.iter().skip(self.samples.len() - n).copied().collect()
    }
}

/// Static map: lanes (index 0 is the ego route), drivable area and sensor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapData {
    pub lanes: Vec<ReferencePath>,
    pub drivable: Polygon,
    pub ego_route: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    /// Index 0 is the ego.
    pub agents: Vec<AgentState>,
    pub histories: Vec<HistoryBuffer>,
    pub static_occluders: Vec<Polygon>,
    pub map: Arc<MapData>,
    pub sensor: VisibilityParams,
    visible_region: Option<Polygon>,
}

/// Ego pose and motion at the next tick, read off the executing primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoMotion {
    pub pose: Pose,
    pub speed: f64,
    pub accel: f64,
}

impl WorldState {
    /// Builds a world at tick 0 and records the first history samples.
    pub fn new(
        agents: Vec<AgentState>,
        static_occluders: Vec<Polygon>,
        map: Arc<MapData>,
        sensor: VisibilityParams,
    ) -> Self {
        assert!(matches!(agents.first().map(|a| a.role), Some(Role::Ego)), "agent 0 must be the ego");
        let mut ids: Vec<_> = agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), agents.len(), "agent ids must be unique");
        let histories = agents.iter().map(|_| HistoryBuffer::new(HISTORY_CAPACITY)).collect();
        let mut w = Self { tick: 0, agents, histories, static_occluders, map, sensor, visible_region: None };
        w.refresh_visibility();
        w.record_histories();
        w
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * TICK
    }

    pub fn ego(&self) -> &AgentState {
        &self.agents[0]
    }

    pub fn ego_route(&self) -> &ReferencePath {
        &self.map.lanes[self.map.ego_route]
    }

    pub fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    /// Static occluders plus every non-ego vehicle footprint. Shapes that
    /// contain the ego (overlap, i.e. a collision) are left out.
    pub fn occluders(&self) -> Vec<Polygon> {
        let ego = self.ego().pose.position;
        self.static_occluders
            .iter()
            .cloned()
            .chain(self.agents.iter().skip(1).map(|a| a.footprint().to_polygon()))
            .filter(|p| !point_in_polygon(ego, p))
            .collect()
    }

    /// Ego visible region for the current tick.
    pub fn visible_region(&self) -> &Polygon {
        self.visible_region.as_ref().expect("visibility computed on construction and step")
    }

    fn refresh_visibility(&mut self) {
        let vr = visibility_polygon_oriented(self.ego().pose, &self.occluders(), self.sensor.sensor_range, self.sensor.n_rays)
            .unwrap_or_else(|_| Polygon::regular(self.ego().pose.position, 1e-3, 8));
        self.visible_region = Some(vr);
    }

    pub fn is_visible(&self, idx: usize) -> bool {
        idx == 0 || agent_visible(&self.agents[idx], self.visible_region())
    }

    fn record_histories(&mut self) {
        for i in 0..self.agents.len() {
            let visible = self.is_visible(i);
            let a = &self.agents[i];
            self.histories[i].push(HistorySample {
                x: a.pose.position.x,
                y: a.pose.position.y,
                v: a.speed,
                psi: a.pose.heading,
                tick: self.tick,
                visible,
            });
        }
    }

    /// Advances one tick: the ego jumps to `ego`, traffic follows its lane
    /// policy evaluated on the pre-step state, then visibility and histories
    /// are refreshed.
    pub fn advance(&mut self, ego: EgoMotion) {
        let commands: Vec<Option<f64>> =
            (0..self.agents.len()).map(|i| if i == 0 { None } else { Some(traffic_policy_step(self, i)) }).collect();
        let next_tick = self.tick + 1;
        let map = Arc::clone(&self.map);
        for (i, a) in self.agents.iter_mut().enumerate() {
            if i == 0 {
                a.pose = ego.pose;
                a.speed = ego.speed;
                a.accel = ego.accel;
                continue;
            }
            let Some(f) = a.follower.as_mut() else {
                // free agent: constant velocity along its heading
                a.pose.position += a.velocity() * TICK;
                continue;
            };
            if self.tick < f.activation_tick {
                a.speed = 0.0;
                a.accel = 0.0;
                continue;
            }
            if self.tick == f.activation_tick && a.speed == 0.0 {
                a.speed = f.desired_speed;
            }
            let accel = commands[i].unwrap_or(0.0);
            let v0 = a.speed;
            let v1 = (v0 + accel * TICK).max(0.0);
            f.s += 0.5 * (v0 + v1) * TICK;
            a.speed = v1;
            a.accel = accel;
            let lane = &map.lanes[f.lane];
            a.pose = Pose::new(lane.point_at(f.s), lane.heading_at(f.s));
        }
        self.tick = next_tick;
        self.refresh_visibility();
        self.record_histories();
    }

    pub fn step(&self, ego: EgoMotion) -> WorldState {
        let mut w = self.clone();
        w.advance(ego);
        w
    }
}

/// An agent counts as visible when any corner of its slightly enlarged
/// footprint lies inside the visible region.
pub fn agent_visible(agent: &AgentState, vr: &Polygon) -> bool {
    agent.footprint().inflated(0.05, 0.05).corners().iter().any(|&c| point_in_polygon(c, vr))
}

/// Gap from agent `i` to the nearest agent ahead in its lane corridor.
pub fn lane_leader_gap(world: &WorldState, i: usize) -> Option<(usize, f64)> {
    let a = &world.agents[i];
    let f = a.follower?;
    let lane = &world.map.lanes[f.lane];
    let half = 0.5 * lane.lane_width();
    let mut best: Option<(usize, f64)> = None;
    for (j, b) in world.agents.iter().enumerate() {
        if j == i || a.pose.position.distance(b.pose.position) > 80.0 {
            continue;
        }
        let Ok(fp) = lane.to_frenet(b.pose.position) else { continue };
        if fp.d.abs() >= half || fp.s <= f.s {
            continue;
        }
        let gap = fp.s - f.s - 0.5 * (a.length + b.length);
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((j, gap));
        }
    }
    best
}

/// Longitudinal acceleration command of a lane-following traffic agent.
pub fn traffic_policy_step(world: &WorldState, i: usize) -> f64 {
    let a = &world.agents[i];
    let Some(f) = a.follower else { return 0.0 };
    if world.tick < f.activation_tick {
        return 0.0;
    }
    if f.behavior == TrafficBehavior::ConstantVelocity {
        return 0.0;
    }
    let v = if world.tick == f.activation_tick && a.speed == 0.0 { f.desired_speed } else { a.speed };
    if let Some((_, gap)) = lane_leader_gap(world, i) {
        if gap < v * v / (2.0 * TRAFFIC_BRAKE) + TRAFFIC_STANDSTILL_GAP {
            return if v > 0.0 { -TRAFFIC_BRAKE } else { 0.0 };
        }
    }
    if v < f.desired_speed {
        TRAFFIC_RECOVER_ACCEL.min((f.desired_speed - v) / TICK)
    } else if v > f.desired_speed {
        -TRAFFIC_BRAKE.min((v - f.desired_speed) / TICK)
    } else {
        0.0
    }
}

/// First overlapping footprint pair, checking pairs involving the ego first.
pub fn detect_collision(world: &WorldState) -> Option<(AgentId, AgentId)> {
    let boxes: Vec<OrientedBox> = world.agents.iter().map(AgentState::footprint).collect();
    let n = boxes.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if boxes[i].center.distance(boxes[j].center) > 0.5 * (boxes[i].length + boxes[j].length + boxes[i].width + boxes[j].width) {
                continue;
            }
            if boxes[i].intersects(&boxes[j]) {
                return Some((world.agents[i].id, world.agents[j].id));
            }
        }
    }
    None
}

/// Ego collision partner, if any.
pub fn ego_collision(world: &WorldState) -> Option<AgentId> {
    let ego = world.ego().footprint();
    world.agents.iter().skip(1).find(|a| a.footprint().intersects(&ego)).map(|a| a.id)
}

/// Any ego footprint corner outside the drivable area (boundary counts as inside).
pub fn off_road(world: &WorldState) -> bool {
    world.ego().footprint().corners().iter().any(|&c| !point_in_polygon(c, &world.map.drivable))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_map() -> Arc<MapData> {
        let lane = ReferencePath::straight(Vec2::new(-50.0, 0.0), Vec2::new(150.0, 0.0), 1.0, 3.5).unwrap();
        Arc::new(MapData {
            lanes: vec![lane],
            drivable: Polygon::rect(Vec2::new(-50.0, -1.75), Vec2::new(150.0, 1.75)),
            ego_route: 0,
        })
    }

    fn ego_at(x: f64, speed: f64) -> AgentState {
        AgentState {
            id: 0,
            pose: Pose::new(Vec2::new(x, 0.0), 0.0),
            speed,
            accel: 0.0,
            length: 4.5,
            width: 1.9,
            role: Role::Ego,
            follower: None,
        }
    }

    fn traffic(id: AgentId, s: f64, v: f64, activation_tick: u64) -> AgentState {
        AgentState {
            id,
            pose: Pose::new(Vec2::new(s - 50.0, 0.0), 0.0),
            speed: if activation_tick == 0 { v } else { 0.0 },
            accel: 0.0,
            length: 4.5,
            width: 1.9,
            role: Role::Traffic,
            follower: Some(LaneFollower { lane: 0, s, desired_speed: v, activation_tick, behavior: TrafficBehavior::GapKeeping }),
        }
    }

    fn hold(w: &WorldState) -> EgoMotion {
        EgoMotion { pose: w.ego().pose, speed: w.ego().speed, accel: 0.0 }
    }

    #[test]
    fn resting_world_only_advances_time() {
        let w = WorldState::new(vec![ego_at(0.0, 0.0), traffic(1, 80.0, 0.0, 0)], vec![], straight_map(), VisibilityParams::default());
        let next = w.step(hold(&w));
        assert_eq!(next.tick, 1);
        assert_eq!(next.agents, w.agents);
        assert!((next.time() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn constant_velocity_advance() {
        let w = WorldState::new(vec![ego_at(-40.0, 0.0), traffic(1, 60.0, 10.0, 0)], vec![], straight_map(), VisibilityParams::default());
        let next = w.step(hold(&w));
        assert!((next.agents[1].pose.position.x - 11.0).abs() < 1e-9);
    }

    #[test]
    fn truck_occluder_follows_pose() {
        let mut truck = traffic(1, 70.0, 5.0, 0);
        truck.length = 12.0;
        truck.width = 2.5;
        let w = WorldState::new(vec![ego_at(0.0, 0.0), truck], vec![], straight_map(), VisibilityParams::default());
        let next = w.step(hold(&w));
        let occ = next.occluders();
        let expected = OrientedBox::new(Pose::new(Vec2::new(20.5, 0.0), 0.0), 12.0, 2.5).corners();
        for (a, b) in occ[0].vertices().iter().zip(expected.iter()) {
            assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn activation_delay_and_braking() {
        let w0 = WorldState::new(vec![ego_at(-45.0, 0.0), traffic(1, 20.0, 10.0, 30)], vec![], straight_map(), VisibilityParams::default());
        let mut w = w0.clone();
        for _ in 0..30 {
            w.advance(hold(&w));
            assert_eq!(w.agents[1].pose.position, w0.agents[1].pose.position);
        }
        w.advance(hold(&w));
        assert!(w.agents[1].pose.position.x > w0.agents[1].pose.position.x);

        // stopped leader 10 m ahead of a 10 m/s follower: 10 < 100/8 + 5
        let mut leader = traffic(2, 74.5, 0.0, 0);
        leader.follower.as_mut().unwrap().desired_speed = 0.0;
        let w = WorldState::new(vec![ego_at(-45.0, 0.0), traffic(1, 60.0, 10.0, 0), leader], vec![], straight_map(), VisibilityParams::default());
        assert_eq!(lane_leader_gap(&w, 1).map(|(j, g)| (j, (g * 1e9).round() / 1e9)), Some((2, 10.0)));
        assert_eq!(traffic_policy_step(&w, 1), -TRAFFIC_BRAKE);
        // free lane holds speed
        let w = WorldState::new(vec![ego_at(-45.0, 0.0), traffic(1, 60.0, 10.0, 0)], vec![], straight_map(), VisibilityParams::default());
        assert_eq!(traffic_policy_step(&w, 1), 0.0);
    }

    #[test]
    fn collision_and_off_road() {
        let w = WorldState::new(vec![ego_at(0.0, 0.0), traffic(1, 60.0, 0.0, 0)], vec![], straight_map(), VisibilityParams::default());
        assert_eq!(detect_collision(&w), None);
        assert!(!off_road(&w));
        let w = WorldState::new(vec![ego_at(0.0, 0.0), traffic(1, 50.0, 0.0, 0)], vec![], straight_map(), VisibilityParams::default());
        assert_eq!(detect_collision(&w), Some((0, 1)));

        let mut e = ego_at(0.0, 0.0);
        e.pose.position.y = 7.0;
        let w = WorldState::new(vec![e], vec![], straight_map(), VisibilityParams::default());
        assert!(off_road(&w));
        // ego exactly filling the lane width: corners on the boundary
        let mut e = ego_at(0.0, 0.0);
        e.width = 3.5;
        let w = WorldState::new(vec![e], vec![], straight_map(), VisibilityParams::default());
        assert!(!off_road(&w));
    }

    #[test]
    fn histories_track_visibility() {
        let occluder = Polygon::rect(Vec2::new(10.0, -5.0), Vec2::new(12.0, 5.0));
        let w = WorldState::new(
            vec![ego_at(0.0, 0.0), traffic(1, 80.0, 0.0, 0), traffic(2, 55.0, 0.0, 0)],
            vec![occluder],
            straight_map(),
            VisibilityParams::default(),
        );
        assert!(!w.is_visible(1));
        assert!(w.is_visible(2));
        let mut w = w;
        for _ in 0..25 {
            w.advance(hold(&w));
        }
        assert_eq!(w.histories[2].len(), HISTORY_CAPACITY);
        assert!(w.histories[1].visible_suffix().is_empty());
        let ticks: Vec<u64> = w.histories[2].iter().map(|s| s.tick).collect();
        assert!(ticks.windows(2).all(|p| p[1] == p[0] + 1));
    }
}
