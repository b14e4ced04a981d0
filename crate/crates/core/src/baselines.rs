//! Rule-based comparison planners: an occlusion-blind lane follower with
//! overtaking, and a reachable-set speed planner that guards every conflict
//! zone against worst-case hidden traffic.

use crate::geom2d::{segments_intersect, Vec2};
use crate::scenario::{Conflict, Layout, CAR_LENGTH};
use crate::smp::{solve_clamped, BoundaryEnd, FeasibilityLimits, FrenetState, PRIMITIVE_DURATION};
use crate::world::{AgentState, WorldState};
use serde::{Deserialize, Serialize};

/// Visible traffic expressed in the ego route frame.
#[derive(Debug, Clone, Copy)]
struct RouteAgent {
    s: f64,
    d: f64,
    speed_along: f64,
    length: f64,
}

fn visible_on_route(world: &WorldState) -> Vec<RouteAgent> {
    let route = world.ego_route();
    (1..world.agents.len())
        .filter(|&i| world.is_visible(i))
        .filter_map(|i| {
            let a = &world.agents[i];
            let f = route.to_frenet(a.pose.position).ok()?;
            let along = Vec2::from_angle(route.heading_at(f.s)).dot(a.velocity());
            Some(RouteAgent { s: f.s, d: f.d, speed_along: along, length: a.length })
        })
        .collect()
}

/// Closest visible agent ahead within the lane corridor around `d`.
fn leader(agents: &[RouteAgent], ego: &FrenetState, d: f64, half_width: f64) -> Option<(f64, RouteAgent)> {
    agents
        .iter()
        .filter(|a| a.s > ego.s && (a.d - d).abs() < half_width)
        .map(|a| (a.s - ego.s - 0.5 * (a.length + CAR_LENGTH), *a))
        .min_by(|x, y| x.0.total_cmp(&y.0))
}

/// Speed that closes onto the desired following gap.
fn follow_speed(gap: f64, leader_speed: f64, target: f64) -> f64 {
    let desired = 5.0 + 1.0 * leader_speed.max(0.0);
    (leader_speed.max(0.0) + (gap - desired) / 2.0).clamp(0.0, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlindParams {
    pub target_speed: f64,
    /// Overtake when the leader is slower than this fraction of the target.
    pub overtake_ratio: f64,
    /// Visible stretch of the oncoming lane that must be empty to pull out.
    pub clear_distance: f64,
    pub lane_width: f64,
}

impl Default for BlindParams {
    fn default() -> Self {
        Self { target_speed: 12.0, overtake_ratio: 0.5, clear_distance: 100.0, lane_width: 3.5 }
    }
}

/// Lane following with gap keeping and opportunistic overtaking. Only
/// visible agents are considered; occlusion is ignored entirely.
pub fn blind_planner(world: &WorldState, ego: &FrenetState, p: &BlindParams) -> BoundaryEnd {
    let agents = visible_on_route(world);
    let half = 0.5 * p.lane_width;
    let oncoming_d = p.lane_width;
    let in_oncoming = ego.d > half;

    let oncoming_clear = |from: f64, to: f64| {
        !agents.iter().any(|a| (a.d - oncoming_d).abs() < half + 0.5 && a.s > from && a.s < to && a.speed_along < 0.5)
    };

    if in_oncoming {
        // pass until the slow vehicle is behind, then merge back
        let slow_ahead = agents
            .iter()
            .filter(|a| a.d.abs() < half && a.s + 0.5 * a.length + 0.5 * CAR_LENGTH + 6.0 > ego.s)
            .count();
        if slow_ahead > 0 && oncoming_clear(ego.s, ego.s + 40.0) {
            return BoundaryEnd::new(p.target_speed, oncoming_d);
        }
        return BoundaryEnd::new(p.target_speed, 0.0);
    }

    match leader(&agents, ego, 0.0, half) {
        None => BoundaryEnd::new(p.target_speed, 0.0),
        Some((gap, lead)) => {
            let wants_pass = lead.speed_along < p.overtake_ratio * p.target_speed && gap < 40.0;
            if wants_pass && oncoming_clear(ego.s - 10.0, ego.s + p.clear_distance) {
                BoundaryEnd::new(p.target_speed, oncoming_d)
            } else {
                BoundaryEnd::new(follow_speed(gap, lead.speed_along, p.target_speed), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsaParams {
    pub target_speed: f64,
    /// Upper bound on the speed of any hidden agent.
    pub v_hyp_max: f64,
    /// Required lead over the worst-case arrival, seconds.
    pub margin: f64,
    /// Deceleration assumed for the stopping option, m/s².
    pub stop_decel: f64,
    /// Lag before full deceleration builds up, seconds.
    pub stop_lag: f64,
    /// Distance kept in front of a conflict zone when stopping.
    pub stop_buffer: f64,
    pub speed_step: f64,
    pub t_exec: f64,
    pub lane_width: f64,
}

impl Default for RsaParams {
    fn default() -> Self {
        Self {
            target_speed: 12.0,
            v_hyp_max: 14.0,
            margin: 0.5,
            stop_decel: 3.0,
            stop_lag: 0.6,
            stop_buffer: 0.5,
            speed_step: 0.5,
            t_exec: 1.0,
            lane_width: 3.5,
        }
    }
}

/// Earliest time a worst-case agent on a conflict's crossing lane can reach
/// the conflict zone. Hidden agents may sit anywhere outside the visible
/// region; visible ones are bounded by the same top speed.
pub fn worst_case_arrival(world: &WorldState, c: &Conflict, v_hyp: f64) -> f64 {
    let lane = &world.map.lanes[c.lane];
    let origin = world.ego().pose.position;
    let range = world.sensor.sensor_range;
    let edges: Vec<(Vec2, Vec2)> = world.occluders().iter().flat_map(|o| o.edges().collect::<Vec<_>>()).collect();
    let sees = |p: Vec2| p.distance(origin) <= range && !edges.iter().any(|&(a, b)| segments_intersect(origin, p, a, b));
    let mut best = f64::INFINITY;
    // walk upstream from the zone entry to the first occluded point
    let mut s = c.lane_s.hi;
    while s >= 0.0 {
        if !sees(lane.point_at(s)) {
            let front = s;
            best = ((c.lane_s.lo - front).max(0.0)) / v_hyp;
            break;
        }
        s -= 0.5;
    }
    for i in 1..world.agents.len() {
        let a: &AgentState = &world.agents[i];
        if a.follower.is_none_or(|f| f.lane != c.lane) || !world.is_visible(i) {
            continue;
        }
        let s_a = a.follower.unwrap().s;
        if s_a - 0.5 * a.length > c.lane_s.hi {
            continue;
        }
        let front = s_a + 0.5 * a.length;
        best = best.min((c.lane_s.lo - front).max(0.0) / v_hyp);
    }
    best
}

/// Distance needed to stop from `v` with the planner's conservative profile.
pub fn stopping_distance(v: f64, p: &RsaParams) -> f64 {
    let v = v.max(0.0);
    v * p.stop_lag + v * v / (2.0 * p.stop_decel)
}

/// Furthest route position reached by the stopping primitive from `st`,
/// which carries the current acceleration into the stop.
fn stop_reach(st: &FrenetState, limits: &FeasibilityLimits) -> f64 {
    let prim = solve_clamped(&st.as_start(), &BoundaryEnd::new(0.0, st.d), PRIMITIVE_DURATION, limits).primitive;
    let max_s = prim.samples.iter().map(|x| x.s).fold(st.s, f64::max);
    let last = prim.samples.last().unwrap();
    max_s + stopping_distance(last.s_d, &RsaParams::default())
}

/// Largest admissible end speed: for every conflict ahead the ego either
/// clears it before the worst-case arrival minus the margin, or can still
/// stop in front of it after executing this decision step. Never changes lane.
pub fn rsa_planner(world: &WorldState, ego: &FrenetState, layout: &Layout, p: &RsaParams, limits: &FeasibilityLimits) -> BoundaryEnd {
    let agents = visible_on_route(world);
    let mut cap = p.target_speed;
    if let Some((gap, lead)) = leader(&agents, ego, 0.0, 0.5 * p.lane_width) {
        cap = cap.min(follow_speed(gap, lead.speed_along, p.target_speed));
    }
    let ahead: Vec<(&Conflict, f64)> = layout
        .conflicts
        .iter()
        .filter(|c| ego.s < c.ego_s.hi)
        .map(|c| (c, worst_case_arrival(world, c, p.v_hyp_max)))
        .collect();
    if ahead.is_empty() {
        return BoundaryEnd::new(cap, 0.0);
    }

    let start = FrenetState { s_d: ego.s_d.max(0.0), ..*ego }.as_start();
    let n_exec = (p.t_exec / crate::smp::SAMPLE_DT).round() as usize;
    let admissible = |v: f64| {
        let prim = solve_clamped(&start, &BoundaryEnd::new(v, 0.0), PRIMITIVE_DURATION, limits).primitive;
        let after = prim.samples[n_exec.min(prim.samples.len() - 1)];
        ahead.iter().all(|&(c, t_arr)| {
            let clear_time = prim
                .samples
                .iter()
                .position(|st| st.s >= c.ego_s.hi)
                .map(|k| k as f64 * crate::smp::SAMPLE_DT)
                .or_else(|| {
                    let last = prim.samples.last().unwrap();
                    (last.s_d > 0.1).then(|| prim.duration + (c.ego_s.hi - last.s) / last.s_d)
                });
            let clears = clear_time.is_some_and(|t| t < t_arr - p.margin);
            let stops = after.s + stopping_distance(after.s_d, p) <= c.ego_s.lo - p.stop_buffer
                && stop_reach(&after, limits) <= c.ego_s.lo - p.stop_buffer;
            clears || stops
        })
    };

    let n = (cap / p.speed_step).floor() as usize;
    for k in (0..=n).rev() {
        let v = if k == n { cap } else { k as f64 * p.speed_step };
        if admissible(v) {
            return BoundaryEnd::new(v, 0.0);
        }
    }
    // nothing admissible: inside a zone get out, otherwise brake
    if ahead.iter().any(|(c, _)| ego.s >= c.ego_s.lo) {
        BoundaryEnd::new(p.target_speed, 0.0)
    } else {
        BoundaryEnd::new(0.0, 0.0)
    }
}
