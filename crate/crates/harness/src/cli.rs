use crate::ablation::{ablation_preset, Ablation};
use crate::eval::{evaluate, latency, summarize, EpisodeRecord, LatencySummary, MetricsSummary};
use crate::export::{read_jsonl, write_jsonl, write_latency_csv, write_metrics_csv, write_table_csv};
use crate::policy::{load_driver, PolicyKind};
use crate::replay::write_replay_csv;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use occsim_core::obs::ObsKind;
use occsim_core::safety::ConstantVelocity;
use occsim_core::scenario::{ScenarioConfig, ScenarioKind};
use occsim_rl::{train, TrainConfig};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "occsim", version, about = "Occlusion-aware driving: training, evaluation, ablations and replay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Run a 100-episode style evaluation suite.
    Eval(EvalArgs),
    /// Train and evaluate ablated variants.
    Ablate(AblateArgs),
    /// Convert one logged episode to a per-tick CSV.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "t_intersection")]
    pub scenario: ScenarioKind,
    /// Training config JSON; overrides --scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total decision steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = "padai")]
    pub policy: PolicyKind,
    /// Defaults to the checkpoint's scenario, or all scenarios for baselines.
    #[arg(long)]
    pub scenario: Option<ScenarioKind>,
    /// Scenario config JSON; overrides --scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub name: Ablation,
    #[arg(long, default_value = "t_intersection")]
    pub scenario: ScenarioKind,
    /// Base training config JSON; overrides --scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    /// Also train the unablated base config as variant `full`.
    #[arg(long)]
    pub with_full: bool,
    /// Reuse variants whose final checkpoint already exists.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Episodes JSONL written by `eval`.
    #[arg(long)]
    pub record: PathBuf,
    /// Episode seed to replay.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub scenario: Option<ScenarioKind>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => run_train(&a),
        Command::Eval(a) => run_eval(&a),
        Command::Ablate(a) => run_ablate(&a),
        Command::Replay(a) => run_replay(&a),
    }
}

fn train_config(scenario: ScenarioKind, config: Option<&Path>, seed: Option<u64>, steps: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(p) => TrainConfig::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => TrainConfig::for_scenario(scenario),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = steps {
        cfg.ppo.total_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_logged(cfg: &TrainConfig, out: &Path) -> Result<PathBuf> {
    let outcome = train(cfg, out, &ConstantVelocity, &mut |l| {
        eprintln!(
            "iter {:4} steps {:8} reward {:+.4} success {:.3} collision {:.3} risky {:.3} critic {:.4}",
            l.iteration, l.steps, l.mean_reward, l.success_rate, l.collision_rate, l.risky_rate, l.critic_loss
        )
    })?;
    Ok(outcome.final_checkpoint)
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a.scenario, a.config.as_deref(), a.seed, a.steps)?;
    let ck = train_logged(&cfg, &a.out)?;
    println!("final checkpoint {}", ck.display());
    Ok(())
}

/// Evaluates one policy on one scenario; `scenario = None` keeps the
/// checkpoint's own scenario.
pub fn eval_suite(
    policy: PolicyKind,
    scenario: Option<&ScenarioConfig>,
    checkpoint: Option<&Path>,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    let (driver, env) = load_driver(policy, scenario, checkpoint)?;
    evaluate(&driver, &env, episodes, seed, &ConstantVelocity)
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let scenarios: Vec<Option<ScenarioConfig>> = match (&a.config, a.scenario) {
        (Some(p), _) => vec![Some(ScenarioConfig::from_json_file(p)?)],
        (None, Some(k)) => vec![Some(ScenarioConfig::preset(k))],
        (None, None) if a.policy == PolicyKind::Padai => vec![None],
        (None, None) => ScenarioKind::ALL.into_iter().map(|k| Some(ScenarioConfig::preset(k))).collect(),
    };
    fs::create_dir_all(&a.out)?;
    let (mut records, mut metrics, mut latencies) = (Vec::new(), Vec::new(), Vec::new());
    for sc in &scenarios {
        let recs = eval_suite(a.policy, sc.as_ref(), a.checkpoint.as_deref(), a.episodes, a.seed)?;
        if let Some(m) = summarize(&recs) {
            print_summary(&m, latency(&recs).as_ref());
            metrics.push(m);
        }
        latencies.extend(latency(&recs));
        records.extend(recs);
    }
    write_outputs(&a.out, &records, &metrics, &latencies)
}

fn print_summary(m: &MetricsSummary, l: Option<&LatencySummary>) {
    print!(
        "{} {}: success {:.1}% collision {:.1}% timeout {:.1}% off-road {:.1}% speed {:.2} m/s",
        m.policy, m.scenario, m.success_rate, m.collision_rate, m.timeout_rate, m.off_road_rate, m.mean_speed
    );
    match l {
        Some(l) => println!(" latency mean {:.2} ms p95 {:.2} ms", l.mean_ms, l.p95_ms),
        None => println!(),
    }
}

fn write_outputs(out: &Path, records: &[EpisodeRecord], metrics: &[MetricsSummary], latencies: &[LatencySummary]) -> Result<()> {
    write_jsonl(&out.join("episodes.jsonl"), records)?;
    write_metrics_csv(&out.join("metrics.csv"), metrics)?;
    write_table_csv(&out.join("table.csv"), metrics)?;
    write_latency_csv(&out.join("latency.csv"), latencies)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub t_exec: f64,
    pub include_vr: bool,
    pub safety: bool,
    pub grid_obs: bool,
    pub steps: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub mean_speed: f64,
}

fn run_ablate(a: &AblateArgs) -> Result<()> {
    let base = train_config(a.scenario, a.config.as_deref(), a.seed, a.steps)?;
    let mut variants = Vec::new();
    if a.with_full {
        variants.push(("full".to_string(), base.clone()));
    }
    variants.extend(ablation_preset(a.name, &base));
    fs::create_dir_all(&a.out)?;
    let mut rows = Vec::new();
    for (name, cfg) in &variants {
        let dir = a.out.join(name);
        let ck = dir.join("policy_final.json");
        if !(a.resume && ck.exists()) {
            eprintln!("training {name}");
            train_logged(cfg, &dir)?;
        }
        let recs = eval_suite(PolicyKind::Padai, None, Some(&ck), a.episodes, base.seed.wrapping_add(1_000_000))?;
        let Some(m) = summarize(&recs) else { bail!("no episodes evaluated") };
        print!("{name}: ");
        print_summary(&m, latency(&recs).as_ref());
        rows.push(AblationRow {
            variant: name.clone(),
            t_exec: cfg.t_exec,
            include_vr: cfg.obs.include_vr,
            safety: cfg.safety.is_some(),
            grid_obs: cfg.obs.kind == ObsKind::Grid,
            steps: cfg.ppo.total_steps,
            success_rate: m.success_rate,
            collision_rate: m.collision_rate,
            timeout_rate: m.timeout_rate,
            mean_speed: m.mean_speed,
        });
        write_jsonl(&dir.join("episodes.jsonl"), &recs)?;
    }
    let mut w = csv::Writer::from_path(a.out.join(format!("{}.csv", a.name)))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn run_replay(a: &ReplayArgs) -> Result<()> {
    let records = read_jsonl(&a.record)?;
    let matches: Vec<&EpisodeRecord> = records
        .iter()
        .filter(|r| r.seed == a.seed && a.policy.is_none_or(|p| p == r.policy) && a.scenario.is_none_or(|s| s == r.scenario))
        .collect();
    let record = match matches.as_slice() {
        [r] => *r,
        [] => bail!("no episode with seed {} in {}", a.seed, a.record.display()),
        _ => bail!("{} episodes match seed {}; narrow with --policy or --scenario", matches.len(), a.seed),
    };
    let rows = write_replay_csv(&a.out, record)?;
    println!("{} rows ({} ticks, {}) -> {}", rows, record.ticks.len(), record.status.name(), a.out.display());
    Ok(())
}
