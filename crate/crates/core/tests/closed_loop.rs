use occsim_core::baselines::{blind_planner, rsa_planner, BlindParams, RsaParams};
use occsim_core::env::{Env, EnvConfig};
use occsim_core::geom2d::{Pose, Vec2};
use occsim_core::safety::{check_primitive, AgentPrediction, ConstantVelocity, PlannedPose, RssParams};
use occsim_core::scenario::{EpisodeStatus, ScenarioConfig, ScenarioKind};
use occsim_core::smp::{BoundaryEnd, FeasibilityLimits};
use occsim_core::world::TrafficBehavior;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight two-lane road: the truck ahead and oncoming cars all drive at
/// constant velocity, so constant-velocity predictions are exact.
fn cv_overtake(safety: bool) -> Env {
    let mut scenario = ScenarioConfig::preset(ScenarioKind::Overtake);
    scenario.traffic = TrafficBehavior::ConstantVelocity;
    let mut cfg = EnvConfig::new(scenario);
    if !safety {
        cfg.safety = None;
    }
    Env::new(cfg, 0).unwrap()
}

/// Random in-lane speed commands; returns the number of collisions.
fn random_lane_keeping(env: &mut Env, episodes: u64) -> usize {
    let modes = ScenarioConfig::modes_for(ScenarioKind::Overtake);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut collisions = 0;
    for ep in 0..episodes {
        env.reset_with_seed(ep, Some(modes[ep as usize % modes.len()]), 1.0);
        while !env.is_done() {
            env.step(BoundaryEnd::new(rng.random_range(0.0..15.0), 0.0), &ConstantVelocity);
        }
        collisions += (env.status() == EpisodeStatus::Collision) as usize;
    }
    collisions
}

#[test]
fn obeyed_risky_stops_avoid_every_collision_with_cv_traffic() {
    let mut env = cv_overtake(true);
    assert_eq!(random_lane_keeping(&mut env, 1000), 0);
}

#[test]
fn the_same_policy_collides_without_the_safety_mechanism() {
    let mut env = cv_overtake(false);
    assert!(random_lane_keeping(&mut env, 100) > 10);
}

fn run_baseline(kind: ScenarioKind, rsa: bool, episodes: u64) -> (usize, f64) {
    let mut cfg = EnvConfig::new(ScenarioConfig::preset(kind));
    cfg.safety = None;
    let mut env = Env::new(cfg, 0).unwrap();
    let modes = ScenarioConfig::modes_for(kind);
    let limits = FeasibilityLimits::default();
    let (mut collisions, mut speed, mut successes) = (0, 0.0, 0);
    for ep in 0..episodes {
        env.reset_with_seed(5000 + ep, Some(modes[ep as usize % modes.len()]), 1.0);
        let (s0, t0) = (env.ego_state().s, env.world().time());
        while !env.is_done() {
            let ego = env.ego_state();
            let end = if rsa {
                rsa_planner(env.world(), &ego, env.layout(), &RsaParams::default(), &limits)
            } else {
                blind_planner(env.world(), &ego, &BlindParams::default())
            };
            env.step(end, &ConstantVelocity);
        }
        match env.status() {
            EpisodeStatus::Collision => collisions += 1,
            EpisodeStatus::Success => {
                successes += 1;
                speed += (env.ego_state().s - s0) / (env.world().time() - t0);
            }
            _ => {}
        }
    }
    (collisions, speed / successes.max(1) as f64)
}

#[test]
fn rsa_never_collides_over_a_thousand_episodes_per_scenario() {
    for kind in ScenarioKind::ALL {
        let (collisions, _) = run_baseline(kind, true, 1000);
        assert_eq!(collisions, 0, "{kind}");
    }
}

#[test]
fn rsa_is_slower_than_the_blind_planner_which_collides() {
    for kind in ScenarioKind::ALL {
        let (_, rsa_speed) = run_baseline(kind, true, 100);
        let (blind_collisions, blind_speed) = run_baseline(kind, false, 100);
        assert!(rsa_speed < blind_speed, "{kind}: {rsa_speed} vs {blind_speed}");
        assert!(blind_collisions > 0, "{kind}");
    }
}

fn straight_plan(speed: f64) -> Vec<PlannedPose> {
    (0..20).map(|j| PlannedPose { pose: Pose::new(Vec2::new(speed * 0.1 * j as f64, 0.0), 0.0), speed }).collect()
}

fn agent_ahead(x: f64, y: f64, vx: f64) -> AgentPrediction {
    AgentPrediction {
        id: 7,
        length: 4.5,
        width: 1.9,
        poses: (0..20).map(|j| Pose::new(Vec2::new(x + vx * 0.1 * j as f64, y), 0.0)).collect(),
        speeds: vec![vx.abs(); 20],
    }
}

#[test]
fn oncoming_car_in_the_target_lane_is_risky_and_parallel_traffic_is_not() {
    let p = RssParams::loose();
    let plan: Vec<PlannedPose> = (0..20)
        .map(|j| PlannedPose { pose: Pose::new(Vec2::new(0.6 * j as f64, 3.5), 0.0), speed: 6.0 })
        .collect();
    let oncoming = AgentPrediction {
        poses: (0..20).map(|j| Pose::new(Vec2::new(15.0 - j as f64, 3.5), std::f64::consts::PI)).collect(),
        ..agent_ahead(0.0, 0.0, 0.0)
    };
    assert!(check_primitive(&plan, (4.5, 1.9), &[oncoming], &p).is_some());
    let parallel = agent_ahead(0.0, 3.5, 10.0);
    assert!(check_primitive(&straight_plan(10.0), (4.5, 1.9), &[parallel], &p).is_none());
    assert!(check_primitive(&straight_plan(10.0), (4.5, 1.9), &[], &p).is_none());
}

proptest! {
    #[test]
    fn loosening_rss_never_turns_an_executed_plan_risky(
        speed in 0.0f64..15.0, x in 3.0f64..60.0, y in -4.0f64..4.0, vx in -10.0f64..12.0,
        rho in 0.1f64..1.0, shrink in 0.0f64..0.1, bmin in 2.0f64..8.0, extra in 0.0f64..4.0,
    ) {
        let strict = RssParams { reaction_time: rho, b_min: bmin, ..RssParams::loose() };
        let loose = RssParams { reaction_time: rho - shrink, b_min: bmin + extra, ..RssParams::loose() };
        let plan = straight_plan(speed);
        let preds = [agent_ahead(x, y, vx)];
        if check_primitive(&plan, (4.5, 1.9), &preds, &strict).is_none() {
            prop_assert!(check_primitive(&plan, (4.5, 1.9), &preds, &loose).is_none());
        }
    }
}
