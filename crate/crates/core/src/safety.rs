//! RSS safety envelope, short-term prediction and risk labeling.

use crate::geom2d::{OrientedBox, Pose, Vec2};
use crate::world::{AgentId, WorldState, TICK};
use serde::{Deserialize, Serialize};

/// Prediction horizon in ticks (2 s).
pub const PREDICTION_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssParams {
    /// Response time, seconds.
    pub reaction_time: f64,
    /// Worst-case acceleration of the rear vehicle during the response time.
    pub a_max: f64,
    /// Braking the rear vehicle is guaranteed to apply.
    pub b_min: f64,
    /// Hardest braking of the front vehicle.
    pub b_max: f64,
    pub lateral_margin: f64,
}

impl RssParams {
    /// Under-approximates strict RSS so only clearly dangerous plans trigger.
    pub fn loose() -> Self {
        Self { reaction_time: 0.3, a_max: 2.0, b_min: 6.0, b_max: 8.0, lateral_margin: 0.5 }
    }
}

impl Default for RssParams {
    fn default() -> Self {
        Self::loose()
    }
}

/// Minimal safe longitudinal gap between a rear and a front vehicle.
pub fn rss_longitudinal_min_gap(v_rear: f64, v_front: f64, p: &RssParams) -> f64 {
    let rho = p.reaction_time;
    let v_resp = v_rear + rho * p.a_max;
    let d = v_rear * rho + 0.5 * p.a_max * rho * rho + v_resp * v_resp / (2.0 * p.b_min)
        - v_front * v_front / (2.0 * p.b_max);
    d.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Executed,
    RiskyTerminated,
    Collided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskVerdict {
    pub outcome: Outcome,
    /// Tick at which the primitive was terminated or the collision occurred.
    pub tick: Option<u64>,
    pub agent: Option<AgentId>,
}

impl RiskVerdict {
    pub fn executed() -> Self {
        Self { outcome: Outcome::Executed, tick: None, agent: None }
    }
}

/// Predicted footprint sequence of one agent; `poses[k]` is `k` ticks ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPrediction {
    pub id: AgentId,
    pub length: f64,
    pub width: f64,
    pub poses: Vec<Pose>,
    pub speeds: Vec<f64>,
}

impl AgentPrediction {
    pub fn velocity(&self, k: usize) -> Vec2 {
        Vec2::from_angle(self.poses[k].heading) * self.speeds[k]
    }
}

/// Short-term motion forecast for one agent.
pub trait TrajectoryPredictor: Sync {
    /// Positions 1..=steps ticks ahead, world frame.
    fn predict_positions(&self, world: &WorldState, agent_idx: usize, steps: usize) -> Vec<Vec2>;
}

/// Constant velocity and heading.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl TrajectoryPredictor for ConstantVelocity {
    fn predict_positions(&self, world: &WorldState, agent_idx: usize, steps: usize) -> Vec<Vec2> {
        let a = &world.agents[agent_idx];
        let v = if a.is_active(world.tick) { a.velocity() } else { Vec2::ZERO };
        (1..=steps).map(|k| a.pose.position + v * (k as f64 * TICK)).collect()
    }
}

/// Predictions for every currently visible non-ego agent. Headings and
/// speeds are read off consecutive predicted positions.
pub fn predict(world: &WorldState, predictor: &dyn TrajectoryPredictor, steps: usize) -> Vec<AgentPrediction> {
    let mut out = Vec::new();
    for i in 1..world.agents.len() {
        if !world.is_visible(i) {
            continue;
        }
        let a = &world.agents[i];
        let mut pts = vec![a.pose.position];
        pts.extend(predictor.predict_positions(world, i, steps));
        let mut poses = Vec::with_capacity(pts.len());
        let mut speeds = Vec::with_capacity(pts.len());
        let mut heading = a.pose.heading;
        for k in 0..pts.len() {
            let step = if k + 1 < pts.len() { pts[k + 1] - pts[k] } else if k > 0 { pts[k] - pts[k - 1] } else { Vec2::ZERO };
            if step.norm() > 1e-6 {
                heading = step.angle();
            }
            poses.push(Pose::new(pts[k], heading));
            speeds.push(step.norm() / TICK);
        }
        out.push(AgentPrediction { id: a.id, length: a.length, width: a.width, poses, speeds });
    }
    out
}

/// Planned ego state at one future tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedPose {
    pub pose: Pose,
    pub speed: f64,
}

/// First planned step (and agent) violating the envelope. `plan[j]` is `j`
/// ticks ahead of now and is compared against prediction step `j`.
///
/// The ego footprint at each step is stretched forward by the RSS gap
/// against the agent's velocity component along the ego heading, and
/// widened by the lateral margin on both sides.
pub fn check_primitive(
    plan: &[PlannedPose],
    ego_size: (f64, f64),
    predictions: &[AgentPrediction],
    params: &RssParams,
) -> Option<(usize, AgentId)> {
    for (j, p) in plan.iter().enumerate() {
        let ego_box = OrientedBox::new(p.pose, ego_size.0, ego_size.1);
        let dir = Vec2::from_angle(p.pose.heading);
        for pred in predictions {
            let Some(&other) = pred.poses.get(j) else { continue };
            if other.position.distance(p.pose.position) > 120.0 {
                continue;
            }
            let v_front = pred.velocity(j).dot(dir).max(0.0);
            let gap = rss_longitudinal_min_gap(p.speed.max(0.0), v_front, params);
            let envelope = ego_box.extended_forward(gap).inflated(0.0, params.lateral_margin);
            if envelope.intersects(&OrientedBox::new(other, pred.length, pred.width)) {
                return Some((j, pred.id));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the progress term of an executed primitive.
    pub progress_weight: f64,
    pub collision: f64,
    pub success_bonus: f64,
    /// Terminal penalty for leaving the road or running out of time.
    pub failure_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { progress_weight: 0.1, collision: -1.0, success_bonus: 1.0, failure_penalty: -1.0 }
    }
}

/// Terminal condition reached during a decision step, for reward purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    None,
    Success,
    Failure,
}

/// Reward of one decision step. `progress` is the route advance relative to
/// the largest possible advance in one step.
pub fn label_reward(outcome: Outcome, progress: f64, terminal: Terminal, cfg: &RewardConfig) -> f64 {
    match outcome {
        Outcome::Collided => cfg.collision,
        Outcome::RiskyTerminated => 0.0,
        Outcome::Executed => {
            let base = cfg.progress_weight * progress.clamp(0.0, 1.0);
            base + match terminal {
                Terminal::None => 0.0,
                Terminal::Success => cfg.success_bonus,
                Terminal::Failure => cfg.failure_penalty,
            }
        }
    }
}
