use occsim::cli::eval_suite;
use occsim::export::{read_jsonl, write_jsonl};
use occsim::{summarize, PolicyKind};
use occsim_core::scenario::{ScenarioConfig, ScenarioKind};
use occsim_net::PolicyParams;
use occsim_rl::train::checkpoint_of;
use occsim_rl::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;

fn untrained_checkpoint(dir: &Path, kind: ScenarioKind) -> std::path::PathBuf {
    let mut cfg = TrainConfig::for_scenario(kind);
    cfg.hidden = 16;
    let params = PolicyParams::init(16, &mut ChaCha8Rng::seed_from_u64(3));
    let path = dir.join("policy.json");
    checkpoint_of(&params, &cfg, 0, 0).save(&path).unwrap();
    path
}

#[test]
fn learned_policy_suite_partitions_outcomes_and_leaves_the_checkpoint_alone() {
    let dir = tempfile::tempdir().unwrap();
    let ck = untrained_checkpoint(dir.path(), ScenarioKind::Overtake);
    let before = std::fs::read(&ck).unwrap();
    let recs = eval_suite(PolicyKind::Padai, None, Some(&ck), 12, 3).unwrap();
    assert_eq!(std::fs::read(&ck).unwrap(), before);
    let m = summarize(&recs).unwrap();
    assert_eq!(m.episodes, 12);
    assert_eq!(m.scenario, ScenarioKind::Overtake);
    let total = m.success_rate + m.collision_rate + m.timeout_rate + m.off_road_rate;
    assert!((total - 100.0).abs() < 1e-9, "{total}");
    for r in &recs {
        assert!(r.status.is_terminal());
        assert!(r.decisions.iter().all(|d| d.latency_ms >= 0.0));
        assert_eq!(r.ticks.len() as f64 - 1.0, (r.duration / 0.1).round());
    }
}

#[test]
fn same_seed_base_gives_the_same_summary() {
    let sc = ScenarioConfig::preset(ScenarioKind::Crossroad);
    let a = summarize(&eval_suite(PolicyKind::Blind, Some(&sc), None, 8, 11).unwrap()).unwrap();
    let b = summarize(&eval_suite(PolicyKind::Blind, Some(&sc), None, 8, 11).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rsa_never_collides_on_the_t_intersection_suite() {
    let sc = ScenarioConfig::preset(ScenarioKind::TIntersection);
    let m = summarize(&eval_suite(PolicyKind::Rsa, Some(&sc), None, 100, 0).unwrap()).unwrap();
    assert_eq!(m.collision_rate, 0.0);
}

#[test]
fn episode_log_round_trips_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let sc = ScenarioConfig::preset(ScenarioKind::TIntersection);
    let recs = eval_suite(PolicyKind::Blind, Some(&sc), None, 4, 0).unwrap();
    let path = dir.path().join("e.jsonl");
    write_jsonl(&path, &recs).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), recs);
}

#[test]
fn cli_eval_then_replay_writes_per_tick_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval");
    let bin = env!("CARGO_BIN_EXE_occsim");
    let status = Command::new(bin)
        .args(["eval", "--policy", "rsa", "--scenario", "overtake", "--episodes", "3", "--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["episodes.jsonl", "metrics.csv", "table.csv", "latency.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let recs = read_jsonl(&out.join("episodes.jsonl")).unwrap();
    assert_eq!(recs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);

    let csv_path = dir.path().join("replay.csv");
    let status = Command::new(bin)
        .args(["replay", "--seed", "6", "--record"])
        .arg(out.join("episodes.jsonl"))
        .arg("--out")
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let rec = &recs[1];
    let rows = rec.ticks.iter().map(|t| 1 + t.agents.len()).sum::<usize>();
    assert_eq!(text.lines().count(), rows + 1);
    assert!(text.starts_with("tick,agent,x,y,heading,speed,visible,stopping,vr_vertices\n"));

    let missing = Command::new(bin).args(["eval", "--policy", "padai", "--out"]).arg(dir.path().join("x")).status().unwrap();
    assert!(!missing.success());
}
