use anyhow::{bail, Context, Result};
use occsim_core::baselines::{blind_planner, rsa_planner, BlindParams, RsaParams};
use occsim_core::env::{Env, EnvConfig};
use occsim_core::scenario::ScenarioConfig;
use occsim_core::smp::{BoundaryEnd, FeasibilityLimits};
use occsim_rl::{PolicyAgent, TrainConfig};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Padai,
    Blind,
    Rsa,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Padai => "padai",
            PolicyKind::Blind => "blind",
            PolicyKind::Rsa => "rsa",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "padai" => Ok(PolicyKind::Padai),
            "blind" => Ok(PolicyKind::Blind),
            "rsa" => Ok(PolicyKind::Rsa),
            _ => Err(format!("unknown policy {s:?} (expected padai, blind or rsa)")),
        }
    }
}

/// Something that picks the next primitive's end conditions.
pub enum Driver {
    Learned(Box<PolicyAgent>),
    Blind(BlindParams),
    Rsa(RsaParams, FeasibilityLimits),
}

impl Driver {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Driver::Learned(_) => PolicyKind::Padai,
            Driver::Blind(_) => PolicyKind::Blind,
            Driver::Rsa(..) => PolicyKind::Rsa,
        }
    }

    /// Deterministic decision: the learned policy acts with its mean.
    pub fn decide(&self, env: &Env) -> BoundaryEnd {
        match self {
            Driver::Learned(agent) => {
                let obs = agent.observe(env.world());
                agent.decide::<ChaCha8Rng>(&obs, None).end
            }
            Driver::Blind(p) => blind_planner(env.world(), &env.ego_state(), p),
            Driver::Rsa(p, limits) => rsa_planner(env.world(), &env.ego_state(), env.layout(), p, limits),
        }
    }
}

/// Driver plus the environment it is evaluated in. Learned policies keep
/// the execution horizon, safety setting and observation of their training
/// run, and its scenario unless `scenario` overrides it; baselines drive
/// without the safety mechanism.
pub fn load_driver(kind: PolicyKind, scenario: Option<&ScenarioConfig>, checkpoint: Option<&Path>) -> Result<(Driver, EnvConfig)> {
    match kind {
        PolicyKind::Padai => {
            let Some(path) = checkpoint else { bail!("--checkpoint is required for the padai policy") };
            let (agent, cfg): (PolicyAgent, TrainConfig) =
                PolicyAgent::from_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            let mut env = cfg.env_config();
            if let Some(sc) = scenario {
                env.scenario = sc.clone();
            }
            Ok((Driver::Learned(Box::new(agent)), env))
        }
        PolicyKind::Blind | PolicyKind::Rsa => {
            let Some(scenario) = scenario else { bail!("baselines need a scenario") };
            let mut env = EnvConfig::new(scenario.clone());
            env.safety = None;
            let driver = if kind == PolicyKind::Blind {
                Driver::Blind(BlindParams::default())
            } else {
                Driver::Rsa(RsaParams::default(), env.limits)
            };
            Ok((driver, env))
        }
    }
}
