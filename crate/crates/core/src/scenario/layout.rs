use super::config::{Interval, ScenarioConfig, ScenarioKind};
use super::{CAR_LENGTH, CAR_WIDTH};
use crate::error::ConfigError;
use crate::geom2d::{Polygon, ReferencePath, Vec2};
use crate::world::MapData;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

const LANE_SPACING: f64 = 1.0;
const CROSS_ROAD_REACH: f64 = 60.0;
const BUILDING_SIZE: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Oncoming,
    Left,
    Right,
}

/// Lane on which hidden agents may be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnLane {
    pub lane: usize,
    pub side: Side,
    /// Arc-length range of candidate spawn positions.
    pub s_range: Interval,
    /// Arc length at which an agent front enters the ego's path.
    pub conflict_s: f64,
}

/// Stretch of the ego route swept by traffic on a crossing lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub lane: usize,
    /// Ego-route arc lengths where the ego center overlaps crossing traffic.
    pub ego_s: Interval,
    /// Crossing-lane arc lengths where an agent center overlaps the ego path.
    pub lane_s: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: ScenarioKind,
    pub map: Arc<MapData>,
    pub buildings: Vec<Polygon>,
    pub spawn_lanes: Vec<SpawnLane>,
    pub conflicts: Vec<Conflict>,
    pub ego_start_s: f64,
    pub goal_s: f64,
    /// Route arc length and speed of the slow truck (overtake only).
    pub truck: Option<(f64, f64)>,
    /// Lane of oncoming traffic next to the ego route, if any.
    pub oncoming_lane: Option<usize>,
}

enum Piece {
    Line(Vec2),
    /// Arc around `center` ending at angle `to` (radians), turning counterclockwise if `ccw`.
    Arc { center: Vec2, to: f64, ccw: bool },
}

fn build_path(start: Vec2, pieces: &[Piece], lane_width: f64) -> Result<ReferencePath, ConfigError> {
    let mut pts = vec![start];
    for piece in pieces {
        let cur = *pts.last().unwrap();
        match *piece {
            Piece::Line(end) => {
                let n = (cur.distance(end) / LANE_SPACING).ceil().max(1.0) as usize;
                pts.extend((1..=n).map(|i| cur.lerp(end, i as f64 / n as f64)));
            }
            Piece::Arc { center, to, ccw } => {
                let r = cur.distance(center);
                let from = (cur - center).angle();
                let mut sweep = to - from;
                if ccw && sweep < 0.0 {
                    sweep += std::f64::consts::TAU;
                } else if !ccw && sweep > 0.0 {
                    sweep -= std::f64::consts::TAU;
                }
                let n = (r * sweep.abs() / LANE_SPACING).ceil().max(1.0) as usize;
                pts.extend((1..=n).map(|i| center + Vec2::from_angle(from + sweep * i as f64 / n as f64) * r));
            }
        }
    }
    Ok(ReferencePath::new(pts, lane_width)?)
}

/// Samples a crossing lane against the ego corridor.
fn find_conflict(route: &ReferencePath, lane_idx: usize, lane: &ReferencePath, corridor: f64) -> Option<Conflict> {
    let mut ego = (f64::INFINITY, f64::NEG_INFINITY);
    let mut other = (f64::INFINITY, f64::NEG_INFINITY);
    let n = (lane.length() / 0.25).ceil() as usize;
    for k in 0..=n {
        let s = lane.length() * k as f64 / n as f64;
        let Ok(f) = route.to_frenet(lane.point_at(s)) else { continue };
        if f.d.abs() <= corridor && f.s >= 0.0 && f.s <= route.length() {
            ego = (ego.0.min(f.s), ego.1.max(f.s));
            other = (other.0.min(s), other.1.max(s));
        }
    }
    if !ego.0.is_finite() {
        return None;
    }
    let reach = 0.5 * (CAR_LENGTH + CAR_WIDTH);
    Some(Conflict {
        lane: lane_idx,
        ego_s: Interval::new(ego.0 - reach, ego.1 + reach),
        lane_s: Interval::new(other.0 - 0.5 * CAR_LENGTH, other.1 + 0.5 * CAR_LENGTH),
    })
}

fn corner_block(sx: f64, sy: f64, offset_x: f64, offset_y: f64) -> Polygon {
    // corner nearest the junction at (sx * offset_x, sy * offset_y)
    let near = Vec2::new(sx * offset_x, sy * offset_y);
    let far = Vec2::new(sx * (offset_x + BUILDING_SIZE), sy * (offset_y + BUILDING_SIZE));
    Polygon::rect(Vec2::new(near.x.min(far.x), near.y.min(far.y)), Vec2::new(near.x.max(far.x), near.y.max(far.y)))
}

impl Layout {
    /// Static geometry of one episode; occluder setback and truck are drawn from `rng`.
    pub fn generate<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Layout, ConfigError> {
        let w = cfg.lane_width;
        let h = 0.5 * w;
        let x_min = cfg.ego_start - 30.0;
        let x_max = cfg.goal + 40.0;
        let route = build_path(Vec2::new(x_min, -h), &[Piece::Line(Vec2::new(x_max, -h))], w)?;
        let westbound = build_path(Vec2::new(x_max, h), &[Piece::Line(Vec2::new(x_min, h))], w)?;
        let ego_start_s = cfg.ego_start - x_min;
        let goal_s = cfg.goal - x_min;
        let corridor = h + 1.0;

        let mut lanes = vec![route, westbound];
        let mut buildings = Vec::new();
        let mut spawn_lanes = Vec::new();
        let mut conflicts = Vec::new();
        let mut truck = None;
        let y_far = CROSS_ROAD_REACH;

        let drivable = match cfg.kind {
            ScenarioKind::Overtake => {
                let gap = cfg.truck_gap.sample(rng);
                let speed = cfg.truck_speed.sample(rng);
                truck = Some((ego_start_s + gap, speed));
                let x_near = cfg.ego_start + cfg.truck_gap.hi + 10.0;
                let x_far = cfg.ego_start + cfg.sensor.sensor_range - 5.0;
                let truck_x = cfg.ego_start + gap;
                if x_far <= x_near {
                    return Err(ConfigError::Invalid("sensor range too short for the oncoming spawn region".into()));
                }
                spawn_lanes.push(SpawnLane {
                    lane: 1,
                    side: Side::Oncoming,
                    s_range: Interval::new(x_max - x_far, x_max - x_near),
                    conflict_s: x_max - truck_x,
                });
                Polygon::rect(Vec2::new(x_min, -w), Vec2::new(x_max, w))
            }
            ScenarioKind::TIntersection => {
                let turning = build_path(
                    Vec2::new(h, -y_far),
                    &[
                        Piece::Line(Vec2::new(h, -w)),
                        Piece::Arc { center: Vec2::new(-w, -w), to: FRAC_PI_2, ccw: true },
                        Piece::Line(Vec2::new(x_min, h)),
                    ],
                    w,
                )?;
                let stem_out = build_path(Vec2::new(-h, -w), &[Piece::Line(Vec2::new(-h, -y_far))], w)?;
                lanes.push(turning);
                lanes.push(stem_out);
                let sb = cfg.occluder_setback.sample(rng);
                buildings.push(corner_block(-1.0, -1.0, w + sb, w + sb));
                Polygon::new(vec![
                    Vec2::new(x_min, -w),
                    Vec2::new(-w, -w),
                    Vec2::new(-w, -y_far),
                    Vec2::new(w, -y_far),
                    Vec2::new(w, -w),
                    Vec2::new(x_max, -w),
                    Vec2::new(x_max, w),
                    Vec2::new(x_min, w),
                ])?
            }
            ScenarioKind::Crossroad => {
                lanes.push(build_path(Vec2::new(h, -y_far), &[Piece::Line(Vec2::new(h, y_far))], w)?);
                lanes.push(build_path(Vec2::new(-h, y_far), &[Piece::Line(Vec2::new(-h, -y_far))], w)?);
                for (sx, sy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    let sb = cfg.occluder_setback.sample(rng);
                    buildings.push(corner_block(sx, sy, w + sb, w + sb));
                }
                Polygon::new(vec![
                    Vec2::new(x_min, -w),
                    Vec2::new(-w, -w),
                    Vec2::new(-w, -y_far),
                    Vec2::new(w, -y_far),
                    Vec2::new(w, -w),
                    Vec2::new(x_max, -w),
                    Vec2::new(x_max, w),
                    Vec2::new(w, w),
                    Vec2::new(w, y_far),
                    Vec2::new(-w, y_far),
                    Vec2::new(-w, w),
                    Vec2::new(x_min, w),
                ])?
            }
        };

        let crossing: &[(usize, Side)] = match cfg.kind {
            ScenarioKind::Overtake => &[],
            ScenarioKind::TIntersection => &[(2, Side::Right)],
            ScenarioKind::Crossroad => &[(2, Side::Right), (3, Side::Left)],
        };
        for &(lane, side) in crossing {
            let c = find_conflict(&lanes[0], lane, &lanes[lane], corridor)
                .ok_or_else(|| ConfigError::Invalid(format!("lane {lane} never crosses the ego route")))?;
            let entry = c.lane_s.lo;
            spawn_lanes.push(SpawnLane {
                lane,
                side,
                s_range: Interval::new((entry - 50.0).max(0.5 * CAR_LENGTH), entry - 2.0),
                conflict_s: entry,
            });
            conflicts.push(c);
        }

        let map = Arc::new(MapData { lanes, drivable, ego_route: 0 });
        Ok(Layout {
            kind: cfg.kind,
            map,
            buildings,
            spawn_lanes,
            conflicts,
            ego_start_s,
            goal_s,
            truck,
            oncoming_lane: Some(1),
        })
    }

    pub fn spawn_lane(&self, side: Side) -> Option<&SpawnLane> {
        self.spawn_lanes.iter().find(|l| l.side == side)
    }
}
