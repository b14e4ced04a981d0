//! Decision-level environment: one primitive executed for `t_exec` seconds
//! per step, with per-tick safety checks and reward labeling.

use crate::error::ConfigError;
use crate::geom2d::{normalize_angle, Pose};
use crate::safety::{
    check_primitive, label_reward, predict, Outcome, PlannedPose, RewardConfig, RiskVerdict, RssParams, Terminal,
    TrajectoryPredictor, PREDICTION_STEPS,
};
use crate::scenario::{build_episode, episode_status, Episode, EpisodeStatus, Goal, Layout, Mode, ScenarioConfig};
use crate::smp::{
    solve_clamped, ActionBounds, BoundaryEnd, ClampedPrimitive, FeasibilityLimits, FrenetState, PRIMITIVE_DURATION,
};
use crate::world::{EgoMotion, WorldState, TICK};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub scenario: ScenarioConfig,
    /// Executed prefix of each primitive, seconds.
    pub t_exec: f64,
    /// `None` disables the safety mechanism.
    pub safety: Option<RssParams>,
    pub reward: RewardConfig,
    pub limits: FeasibilityLimits,
}

impl EnvConfig {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self { scenario, t_exec: 1.0, safety: Some(RssParams::loose()), reward: RewardConfig::default(), limits: FeasibilityLimits::default() }
    }

    pub fn exec_ticks(&self) -> usize {
        (self.t_exec / TICK).round() as usize
    }

    pub fn action_bounds(&self) -> ActionBounds {
        ActionBounds {
            v_min: self.scenario.speed_range.lo,
            v_max: self.scenario.speed_range.hi,
            d_min: self.scenario.lateral_band.lo,
            d_max: self.scenario.lateral_band.hi,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        let ticks = self.t_exec / TICK;
        if !(self.t_exec > 0.0 && self.t_exec < PRIMITIVE_DURATION) || (ticks - ticks.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!("t_exec {} must be a multiple of 0.1 s below 3 s", self.t_exec)));
        }
        Ok(())
    }
}

/// Per-tick ego trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickSample {
    pub tick: u64,
    pub pose: Pose,
    pub speed: f64,
    pub stopping: bool,
}

#[derive(Debug, Clone)]
pub struct DecisionOutcome {
    pub primitive: ClampedPrimitive,
    pub verdict: RiskVerdict,
    pub reward: f64,
    pub status: EpisodeStatus,
    /// Route advance during the step, meters.
    pub progress: f64,
    pub ticks: Vec<TickSample>,
}

pub struct Env {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    episode: Episode,
    ego: FrenetState,
    status: EpisodeStatus,
}

impl Env {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let episode = build_episode(&cfg.scenario, None, 1.0, &mut rng)?;
        let mut env = Self { cfg, rng, episode, ego: FrenetState::default(), status: EpisodeStatus::Running };
        env.sync_ego();
        Ok(env)
    }

    fn sync_ego(&mut self) {
        let w = &self.episode.world;
        let f = w.ego_route().to_frenet(w.ego().pose.position).expect("ego starts on its route");
        self.ego = FrenetState { s: f.s, s_d: w.ego().speed, d: f.d, ..Default::default() };
        self.status = episode_status(w, &self.episode.goal, self.cfg.scenario.timeout);
    }

    /// Starts a new episode from the env's own random stream.
    pub fn reset(&mut self, mode: Option<Mode>, progress: f64) {
        self.episode = build_episode(&self.cfg.scenario, mode, progress, &mut self.rng).expect("config validated on construction");
        self.sync_ego();
    }

    /// Starts a new episode from a dedicated seed, independent of history.
    pub fn reset_with_seed(&mut self, seed: u64, mode: Option<Mode>, progress: f64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.reset(mode, progress);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldState {
        &self.episode.world
    }

    pub fn goal(&self) -> Goal {
        self.episode.goal
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.episode.layout
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn ego_state(&self) -> FrenetState {
        self.ego
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    pub fn is_done(&self) -> bool {
        self.status.is_terminal()
    }

    /// Start conditions for the next primitive. Accelerations left over
    /// from a comfort stop are limited to what a primitive may start with.
    pub fn start_state(&self) -> FrenetState {
        let lim = &self.cfg.limits;
        let mut st = self.ego;
        st.s_dd = st.s_dd.clamp(-lim.max_lon_accel, lim.max_lon_accel);
        st.d_dd = st.d_dd.clamp(-lim.max_lat_accel, lim.max_lat_accel);
        if st.s_d <= 1e-9 {
            st.s_d = 0.0;
            st.s_dd = st.s_dd.max(0.0);
        }
        st
    }

    pub fn solve(&self, end: &BoundaryEnd) -> ClampedPrimitive {
        solve_clamped(&self.start_state().as_start(), end, PRIMITIVE_DURATION, &self.cfg.limits)
    }

    fn pose_of(&self, st: &FrenetState, prev_heading: f64) -> Pose {
        let route = self.episode.world.ego_route();
        let pos = route.from_frenet(st.s, st.d);
        let heading = if st.s_d.hypot(st.d_d) > 0.2 {
            route.heading_at(st.s) + st.d_d.atan2(st.s_d.max(0.0))
        } else {
            prev_heading
        };
        Pose::new(pos, normalize_angle(heading))
    }

    /// Ego plan from primitive sample `k` onward, up to the prediction horizon.
    pub fn plan_from(&self, prim: &ClampedPrimitive, k: usize) -> Vec<PlannedPose> {
        let samples = &prim.primitive.samples;
        let end = (k + PREDICTION_STEPS).min(samples.len() - 1);
        let mut heading = self.episode.world.ego().pose.heading;
        let mut out = Vec::with_capacity(end + 1 - k);
        for st in &samples[k..=end] {
            let st = FrenetState { s_d: st.s_d.max(0.0), ..*st };
            let pose = self.pose_of(&st, heading);
            heading = pose.heading;
            out.push(PlannedPose { pose, speed: st.speed() });
        }
        out
    }

    /// Executes one decision step.
    pub fn step(&mut self, end: BoundaryEnd, predictor: &dyn TrajectoryPredictor) -> DecisionOutcome {
        self.step_observed(end, predictor, &mut |_, _| {})
    }

    /// Like [`Env::step`], calling `on_tick` with the world after every tick.
    pub fn step_observed(
        &mut self,
        end: BoundaryEnd,
        predictor: &dyn TrajectoryPredictor,
        on_tick: &mut dyn FnMut(&WorldState, &TickSample),
    ) -> DecisionOutcome {
        assert!(!self.is_done(), "step called on a finished episode");
        let prim = self.solve(&end);
        let n = self.cfg.exec_ticks();
        let s_before = self.ego.s;
        let mut verdict = RiskVerdict::executed();
        let mut stopping = false;
        let mut ticks = Vec::with_capacity(n);
        let b_stop = self.cfg.safety.map_or(RssParams::loose().b_min, |p| p.b_min);
        let ego_size = (self.episode.world.ego().length, self.episode.world.ego().width);

        for k in 1..=n {
            if let (Some(params), false) = (self.cfg.safety, stopping) {
                let preds = predict(&self.episode.world, predictor, PREDICTION_STEPS);
                if !preds.is_empty() {
                    let plan = self.plan_from(&prim, k - 1);
                    if let Some((_, agent)) = check_primitive(&plan, ego_size, &preds, &params) {
                        stopping = true;
                        verdict = RiskVerdict {
                            outcome: Outcome::RiskyTerminated,
                            tick: Some(self.episode.world.tick),
                            agent: Some(agent),
                        };
                    }
                }
            }
            let prev = self.ego;
            let next = if stopping {
                let v1 = (prev.s_d - b_stop * TICK).max(0.0);
                let ratio = if prev.s_d > 1e-9 { v1 / prev.s_d } else { 0.0 };
                let d_d = prev.d_d * ratio;
                FrenetState {
                    s: prev.s + 0.5 * (prev.s_d + v1) * TICK,
                    s_d: v1,
                    s_dd: (v1 - prev.s_d) / TICK,
                    d: prev.d + 0.5 * (prev.d_d + d_d) * TICK,
                    d_d,
                    d_dd: (d_d - prev.d_d) / TICK,
                }
            } else {
                let st = prim.primitive.samples[k];
                if st.s_d < 0.0 {
                    FrenetState { s: st.s.max(prev.s), s_d: 0.0, s_dd: 0.0, ..st }
                } else {
                    st
                }
            };
            self.ego = next;
            let pose = self.pose_of(&next, self.episode.world.ego().pose.heading);
            self.episode.world.advance(EgoMotion { pose, speed: next.speed(), accel: next.s_dd });
            let sample = TickSample { tick: self.episode.world.tick, pose, speed: next.speed(), stopping };
            on_tick(&self.episode.world, &sample);
            ticks.push(sample);
            self.status = episode_status(&self.episode.world, &self.episode.goal, self.cfg.scenario.timeout);
            if self.status.is_terminal() {
                break;
            }
        }

        if self.status == EpisodeStatus::Collision {
            verdict = RiskVerdict {
                outcome: Outcome::Collided,
                tick: Some(self.episode.world.tick),
                agent: crate::world::ego_collision(&self.episode.world),
            };
        }
        let progress = self.ego.s - s_before;
        let terminal = match self.status {
            EpisodeStatus::Success => Terminal::Success,
            EpisodeStatus::OffRoad | EpisodeStatus::Timeout => Terminal::Failure,
            _ => Terminal::None,
        };
        let max_progress = self.cfg.scenario.speed_range.hi * self.cfg.t_exec;
        let reward = label_reward(verdict.outcome, progress / max_progress, terminal, &self.cfg.reward);
        DecisionOutcome { primitive: prim, verdict, reward, status: self.status, progress, ticks }
    }
}
