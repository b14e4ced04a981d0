use crate::error::ConfigError;
use crate::geom2d::VisibilityParams;
use crate::world::TrafficBehavior;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Overtake,
    TIntersection,
    Crossroad,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Overtake, ScenarioKind::TIntersection, ScenarioKind::Crossroad];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Overtake => "overtake",
            ScenarioKind::TIntersection => "t_intersection",
            ScenarioKind::Crossroad => "crossroad",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "overtake" => Ok(ScenarioKind::Overtake),
            "t_intersection" | "t-intersection" => Ok(ScenarioKind::TIntersection),
            "crossroad" => Ok(ScenarioKind::Crossroad),
            other => Err(ConfigError::UnknownScenario(other.to_string())),
        }
    }
}

/// Hidden-traffic mode of an episode. Evaluation suites stratify over these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    None,
    EarlyOncoming,
    LateOncoming,
    Left,
    Right,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::EarlyOncoming => "early_oncoming",
            Mode::LateOncoming => "late_oncoming",
            Mode::Left => "left",
            Mode::Right => "right",
            Mode::Both => "both",
        }
    }
}

/// Closed interval, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnParams {
    /// Hidden-agent target speed, m/s.
    pub speed: Interval,
    /// Time at which an agent running at its target speed would reach the
    /// conflict point of its lane; the activation time is derived from it.
    pub entry_time: Interval,
    /// Number of hidden agents in episodes whose mode has any.
    pub count: [usize; 2],
    /// Curriculum length scale at progress 0, meters.
    pub curriculum_lambda0: f64,
    /// Spacing of candidate spawn cells along the lane, meters.
    pub cell_size: f64,
}

/// Scenario description. JSON files may give any subset of fields; missing
/// ones are taken from the preset of `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub lane_width: f64,
    /// Ego start and goal line, x coordinate along the ego road.
    pub ego_start: f64,
    pub ego_speed: f64,
    pub goal: f64,
    /// Episode time limit, seconds.
    pub timeout: f64,
    pub sensor: VisibilityParams,
    /// Policy range of the commanded end speed, m/s.
    pub speed_range: Interval,
    /// Policy range of the commanded lateral offset from the ego lane center.
    pub lateral_band: Interval,
    /// Corner-building setback from the road edge (intersections).
    pub occluder_setback: Interval,
    /// Initial distance to the truck and its speed (overtake).
    pub truck_gap: Interval,
    pub truck_speed: Interval,
    pub spawn: SpawnParams,
    pub modes: Vec<Mode>,
    pub traffic: TrafficBehavior,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        let base = Self {
            kind,
            lane_width: 3.5,
            ego_start: -70.0,
            ego_speed: 8.0,
            goal: 40.0,
            timeout: 30.0,
            sensor: VisibilityParams::default(),
            speed_range: Interval::new(0.0, 15.0),
            lateral_band: Interval::new(-1.0, 1.0),
            occluder_setback: Interval::new(1.0, 6.0),
            truck_gap: Interval::new(20.0, 28.0),
            truck_speed: Interval::new(4.0, 6.0),
            spawn: SpawnParams {
                speed: Interval::new(6.0, 12.0),
                entry_time: Interval::new(3.0, 9.0),
                count: [1, 1],
                curriculum_lambda0: 2.0,
                cell_size: 1.0,
            },
            modes: vec![Mode::None, Mode::Right],
            traffic: TrafficBehavior::GapKeeping,
            seed: 0,
        };
        match kind {
            ScenarioKind::Overtake => Self {
                ego_start: 0.0,
                ego_speed: 5.0,
                goal: 150.0,
                timeout: 40.0,
                sensor: VisibilityParams { sensor_range: 100.0, ..VisibilityParams::default() },
                lateral_band: Interval::new(-0.5, 3.5),
                spawn: SpawnParams {
                    speed: Interval::new(8.0, 14.0),
                    entry_time: Interval::new(2.0, 14.0),
                    count: [1, 2],
                    ..base.spawn.clone()
                },
                modes: vec![Mode::None, Mode::EarlyOncoming, Mode::LateOncoming],
                ..base
            },
            ScenarioKind::TIntersection => base,
            ScenarioKind::Crossroad => Self {
                spawn: SpawnParams { count: [1, 2], entry_time: Interval::new(3.0, 8.0), ..base.spawn.clone() },
                modes: vec![Mode::None, Mode::Left, Mode::Right, Mode::Both],
                ..base
            },
        }
    }

    /// Reads a JSON object and overlays it on the preset named by its `kind`.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        let kind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| ConfigError::Invalid("missing `kind`".into()))?
            .parse::<ScenarioKind>()?;
        let mut merged = serde_json::to_value(Self::preset(kind))?;
        merge_json(&mut merged, value.take());
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn modes_for(kind: ScenarioKind) -> &'static [Mode] {
        match kind {
            ScenarioKind::Overtake => &[Mode::None, Mode::EarlyOncoming, Mode::LateOncoming],
            ScenarioKind::TIntersection => &[Mode::None, Mode::Right],
            ScenarioKind::Crossroad => &[Mode::None, Mode::Left, Mode::Right, Mode::Both],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.lane_width > 2.5 && self.lane_width < 6.0) {
            return bad(format!("lane_width {} outside (2.5, 6)", self.lane_width));
        }
        if !(self.goal > self.ego_start + 10.0) {
            return bad("goal must lie at least 10 m ahead of the ego start".into());
        }
        if !(self.ego_speed >= 0.0 && self.ego_speed <= self.speed_range.hi) {
            return bad(format!("ego_speed {} outside speed_range", self.ego_speed));
        }
        if !(self.timeout > 0.0) {
            return bad("timeout must be positive".into());
        }
        if !(self.sensor.sensor_range > 0.0) || self.sensor.n_rays < 36 {
            return bad("sensor needs positive range and at least 36 rays".into());
        }
        let intervals = [
            ("speed_range", self.speed_range),
            ("lateral_band", self.lateral_band),
            ("occluder_setback", self.occluder_setback),
            ("truck_gap", self.truck_gap),
            ("truck_speed", self.truck_speed),
            ("spawn.speed", self.spawn.speed),
            ("spawn.entry_time", self.spawn.entry_time),
        ];
        for (name, i) in intervals {
            if !i.is_valid() {
                return bad(format!("{name} must be [lo, hi] with lo <= hi"));
            }
        }
        if self.speed_range.lo < 0.0 || self.speed_range.hi > 16.0 {
            return bad("speed_range must lie within [0, 16]".into());
        }
        if self.spawn.speed.lo <= 0.0 {
            return bad("spawn speeds must be positive".into());
        }
        if self.spawn.count[0] > self.spawn.count[1] || self.spawn.count[0] == 0 {
            return bad("spawn.count must be [lo, hi] with 1 <= lo <= hi".into());
        }
        if !(self.spawn.curriculum_lambda0 > 0.0) || !(self.spawn.cell_size > 0.0) {
            return bad("curriculum_lambda0 and cell_size must be positive".into());
        }
        if self.occluder_setback.lo < 0.0 {
            return bad("occluder_setback must be nonnegative".into());
        }
        if self.modes.is_empty() {
            return bad("at least one mode required".into());
        }
        let allowed = Self::modes_for(self.kind);
        if let Some(m) = self.modes.iter().find(|m| !allowed.contains(m)) {
            return bad(format!("mode {} not available in {}", m.name(), self.kind));
        }
        if self.kind == ScenarioKind::Overtake && self.truck_gap.lo < 15.0 {
            return bad("truck_gap must be at least 15 m".into());
        }
        Ok(())
    }
}

fn merge_json(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in ScenarioKind::ALL {
            let c = ScenarioConfig::preset(kind);
            c.validate().unwrap();
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(ScenarioConfig::from_json_str(&text).unwrap(), c);
        }
    }

    #[test]
    fn partial_file_overlays_preset() {
        let c = ScenarioConfig::from_json_str(r#"{"kind": "crossroad", "seed": 7, "spawn": {"count": [2, 2]}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.spawn.count, [2, 2]);
        assert_eq!(c.spawn.speed, ScenarioConfig::preset(ScenarioKind::Crossroad).spawn.speed);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(ScenarioConfig::from_json_str(r#"{"kind": "roundabout"}"#), Err(ConfigError::UnknownScenario(_))));
        assert!(ScenarioConfig::from_json_str(r#"{"kind": "overtake", "goal": -5}"#).is_err());
        assert!(ScenarioConfig::from_json_str(r#"{"kind": "t_intersection", "modes": ["left"]}"#).is_err());
        assert!(ScenarioConfig::from_json_str(r#"{"kind": "overtake", "bogus": 1}"#).is_err());
    }
}
