use occsim_core::scenario::{
    blind_spot_cells, build_episode, sample_cell, Episode, Mode, ScenarioConfig, ScenarioKind, Side, SpawnCell,
};
use occsim_core::world::agent_visible;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashSet;

fn episode(kind: ScenarioKind, mode: Mode, seed: u64) -> Episode {
    let cfg = ScenarioConfig::preset(kind);
    build_episode(&cfg, Some(mode), 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn t_intersection_cells() -> Vec<SpawnCell> {
    let ep = episode(ScenarioKind::TIntersection, Mode::None, 3);
    let lanes: Vec<usize> = (0..ep.layout.spawn_lanes.len()).collect();
    let cells = blind_spot_cells(&ep.world, &ep.layout, &lanes, 1.0);
    assert!(cells.len() > 20, "{} cells", cells.len());
    cells
}

#[test]
fn late_curriculum_is_uniform_over_blind_spot_cells() {
    let cells = t_intersection_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draws = 200 * cells.len();
    let mut counts = vec![0usize; cells.len()];
    for _ in 0..draws {
        counts[sample_cell(&cells, 2.0, 1.0, &mut rng).unwrap()] += 1;
    }
    let expected = draws as f64 / cells.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).unwrap();
    let p = 1.0 - dist.cdf(stat);
    assert!(p > 0.01, "chi-square {stat:.1} on {} dof, p = {p:.4}", cells.len() - 1);
}

#[test]
fn early_curriculum_favours_the_blind_spot_edge() {
    let cells = t_intersection_cells();
    let uniform_mean = cells.iter().map(|c| c.edge_distance).sum::<f64>() / cells.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let n = 10_000;
    let biased_mean =
        (0..n).map(|_| cells[sample_cell(&cells, 2.0, 0.0, &mut rng).unwrap()].edge_distance).sum::<f64>() / n as f64;
    assert!(biased_mean < uniform_mean, "{biased_mean} vs {uniform_mean}");
}

#[test]
fn empty_blind_spot_gives_no_draw() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(sample_cell(&[], 2.0, 0.5, &mut rng), None);
}

#[test]
fn hidden_agents_start_outside_the_visible_region() {
    let mut spawned = 0;
    for kind in ScenarioKind::ALL {
        for (k, &mode) in ScenarioConfig::modes_for(kind).iter().enumerate() {
            for seed in 0..60u64 {
                let ep = episode(kind, mode, seed * 10 + k as u64);
                let vr = ep.world.visible_region();
                for a in ep.world.agents.iter().filter(|a| a.id >= 10) {
                    spawned += 1;
                    assert!(!agent_visible(a, vr), "{kind} {} seed {seed}: agent {} visible", mode.name(), a.id);
                }
                if mode == Mode::None {
                    assert!(ep.plan.agents.is_empty());
                }
            }
        }
    }
    assert!(spawned > 300);
}

#[test]
fn crossroad_seed_sweep_covers_counts_and_sides() {
    let cfg = ScenarioConfig::preset(ScenarioKind::Crossroad);
    let mut counts = HashSet::new();
    let mut sides = HashSet::new();
    for seed in 0..1000u64 {
        let ep = build_episode(&cfg, None, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        if ep.mode == Mode::None {
            continue;
        }
        counts.insert(ep.plan.agents.len());
        for a in &ep.plan.agents {
            let side = ep.layout.spawn_lanes.iter().find(|l| l.lane == a.lane).unwrap().side;
            sides.insert(side);
        }
    }
    assert!(counts.contains(&1) && counts.contains(&2), "{counts:?}");
    assert!(sides.contains(&Side::Left) && sides.contains(&Side::Right), "{sides:?}");
}

#[test]
fn truck_is_slow_and_ahead_in_the_ego_lane() {
    for seed in 0..200 {
        let ep = episode(ScenarioKind::Overtake, Mode::None, seed);
        let truck = ep.world.agents.iter().find(|a| a.id == 1).unwrap();
        let f = ep.world.ego_route().to_frenet(truck.pose.position).unwrap();
        let ego = ep.world.ego_route().to_frenet(ep.world.ego().pose.position).unwrap();
        assert!((4.0..=6.0).contains(&truck.speed));
        assert!(f.d.abs() < 1e-9 && f.s > ego.s);
    }
}

#[test]
fn spawn_plan_is_reproducible() {
    for kind in ScenarioKind::ALL {
        let a = episode(kind, *ScenarioConfig::modes_for(kind).last().unwrap(), 9);
        let b = episode(kind, *ScenarioConfig::modes_for(kind).last().unwrap(), 9);
        assert_eq!(a.plan, b.plan);
        assert_eq!(a.world.agents, b.world.agents);
    }
}
