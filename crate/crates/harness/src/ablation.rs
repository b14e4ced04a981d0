use occsim_core::obs::ObsKind;
use occsim_rl::TrainConfig;
use std::fmt;
use std::str::FromStr;

pub const TEXEC_SWEEP: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    NoVr,
    TexecSweep,
    NoSafety,
    GridObs,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::NoVr, Ablation::TexecSweep, Ablation::NoSafety, Ablation::GridObs];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoVr => "no_vr",
            Ablation::TexecSweep => "texec_sweep",
            Ablation::NoSafety => "no_safety",
            Ablation::GridObs => "grid_obs",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ablation::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown ablation {s:?}"))
    }
}

/// Named training configs derived from `base`.
pub fn ablation_preset(ablation: Ablation, base: &TrainConfig) -> Vec<(String, TrainConfig)> {
    let mut cfg = base.clone();
    match ablation {
        Ablation::NoVr => cfg.obs.include_vr = false,
        Ablation::NoSafety => cfg.safety = None,
        Ablation::GridObs => cfg.obs.kind = ObsKind::Grid,
        Ablation::TexecSweep => {
            return TEXEC_SWEEP
                .iter()
                .map(|&t| {
                    let mut c = base.clone();
                    c.t_exec = t;
                    (format!("texec_{t}"), c)
                })
                .collect();
        }
    }
    vec![(ablation.name().to_string(), cfg)]
}
