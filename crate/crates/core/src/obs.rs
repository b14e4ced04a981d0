//! Vectorized observation: visible-region boundary, lanes and agent
//! histories as polylines in the ego frame.

use crate::geom2d::{point_in_polygon, segments_intersect, Polygon, Pose, Vec2};
use crate::world::{WorldState, TICK};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, BufRead, Write};

pub const FEATURE_DIM: usize = 5;
pub const MAX_POLYLINES: usize = 16;
pub const MAX_NODES: usize = 64;
pub const LANE_SPACING: f64 = 2.0;
/// Position and speed scaling applied before encoding.
pub const POSITION_SCALE: f64 = 1.0 / 50.0;
pub const SPEED_SCALE: f64 = 1.0 / 20.0;
pub const GRID_SIZE: usize = 32;
pub const GRID_CELL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolylineKind {
    VisibleRegion,
    Lane,
    Agent,
    /// One row band of the occupancy-grid observation.
    Grid,
}

impl PolylineKind {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            PolylineKind::VisibleRegion => 0,
            PolylineKind::Lane => 1,
            PolylineKind::Agent => 2,
            PolylineKind::Grid => 3,
        }
    }
}

/// Node features, ego frame, unscaled: `(xs, ys, xe, ye, 0)` for boundary and
/// lane vectors, `(x, y, v, psi, t)` for agent samples with `t <= 0` relative
/// to now.
pub type Node = [f64; FEATURE_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub kind: PolylineKind,
    /// Valid nodes only; padding up to `MAX_NODES` is implicit.
    pub nodes: Vec<Node>,
    /// Polyline-level mask. A masked polyline carries no nodes.
    pub valid: bool,
}

impl Polyline {
    pub fn masked(kind: PolylineKind) -> Self {
        Self { kind, nodes: Vec::new(), valid: false }
    }
}

/// At most `MAX_POLYLINES` polylines with at most `MAX_NODES` nodes each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolylineBatch {
    pub polylines: Vec<Polyline>,
}

/// Dense view: `features[p][n]`, `node_mask[p][n]`, `polyline_mask[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub features: Vec<[Node; MAX_NODES]>,
    pub kinds: Vec<PolylineKind>,
    pub node_mask: Vec<[bool; MAX_NODES]>,
    pub polyline_mask: Vec<bool>,
}

impl PolylineBatch {
    pub fn valid_polylines(&self) -> impl Iterator<Item = &Polyline> {
        self.polylines.iter().filter(|p| p.valid && !p.nodes.is_empty())
    }

    pub fn count(&self, kind: PolylineKind) -> usize {
        self.valid_polylines().filter(|p| p.kind == kind).count()
    }

    pub fn padded(&self) -> PaddedBatch {
        let mut out = PaddedBatch {
            features: vec![[[0.0; FEATURE_DIM]; MAX_NODES]; MAX_POLYLINES],
            kinds: vec![PolylineKind::Lane; MAX_POLYLINES],
            node_mask: vec![[false; MAX_NODES]; MAX_POLYLINES],
            polyline_mask: vec![false; MAX_POLYLINES],
        };
        for (i, p) in self.polylines.iter().enumerate().take(MAX_POLYLINES) {
            out.kinds[i] = p.kind;
            out.polyline_mask[i] = p.valid && !p.nodes.is_empty();
            for (j, n) in p.nodes.iter().enumerate().take(MAX_NODES) {
                out.features[i][j] = *n;
                out.node_mask[i][j] = true;
            }
        }
        out
    }

    /// Masks every polyline of `kind`.
    pub fn mask_kind(&mut self, kind: PolylineKind) {
        for p in self.polylines.iter_mut().filter(|p| p.kind == kind) {
            *p = Polyline::masked(kind);
        }
    }
}

/// Scales raw node features for the encoder.
pub fn scale_node(kind: PolylineKind, n: &Node) -> Node {
    let p = POSITION_SCALE;
    match kind {
        PolylineKind::VisibleRegion | PolylineKind::Lane => [n[0] * p, n[1] * p, n[2] * p, n[3] * p, n[4]],
        PolylineKind::Agent => [n[0] * p, n[1] * p, n[2] * SPEED_SCALE, n[3] / std::f64::consts::PI, n[4]],
        PolylineKind::Grid => [n[0] * p, n[1] * p, n[2], n[3], n[4]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKind {
    Polylines,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsConfig {
    pub kind: ObsKind,
    /// When false the visible-region polyline is present but masked.
    pub include_vr: bool,
    pub vr_segments: usize,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self { kind: ObsKind::Polylines, include_vr: true, vr_segments: MAX_NODES }
    }
}

/// Observation of the current world state.
pub fn observe(world: &WorldState, cfg: &ObsConfig) -> PolylineBatch {
    match cfg.kind {
        ObsKind::Polylines => vectorize(world, cfg),
        ObsKind::Grid => occupancy_grid(world),
    }
}

/// Polyline observation: one visible-region polyline, lane pieces inside the
/// visible region, then agent histories (ego first, others by distance).
pub fn vectorize(world: &WorldState, cfg: &ObsConfig) -> PolylineBatch {
    let ego = world.ego().pose;
    let vr = world.visible_region();
    let mut polylines = Vec::with_capacity(MAX_POLYLINES);

    if cfg.include_vr {
        let boundary = downsample_polygon(vr, cfg.vr_segments.clamp(8, MAX_NODES));
        let pts: Vec<Vec2> = boundary.vertices().iter().map(|&v| ego.to_local(v)).collect();
        let nodes = (0..pts.len())
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                [a.x, a.y, b.x, b.y, 0.0]
            })
            .collect();
        polylines.push(Polyline { kind: PolylineKind::VisibleRegion, nodes, valid: true });
    } else {
        polylines.push(Polyline::masked(PolylineKind::VisibleRegion));
    }

    let mut agent_lines = Vec::new();
    agent_lines.push(agent_polyline(world, 0, &ego));
    let mut others: Vec<(f64, usize)> = (1..world.agents.len())
        .filter(|&i| world.is_visible(i))
        .map(|i| (world.agents[i].pose.position.distance(ego.position), i))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    agent_lines.extend(others.into_iter().filter_map(|(_, i)| {
        let p = agent_polyline(world, i, &ego);
        (!p.nodes.is_empty()).then_some(p)
    }));

    let lane_budget = MAX_POLYLINES - polylines.len() - agent_lines.len().min(MAX_POLYLINES / 2);
    let mut lanes = lane_polylines(world, vr, &ego);
    lanes.truncate(lane_budget);
    polylines.extend(lanes);
    let room = MAX_POLYLINES - polylines.len();
    agent_lines.truncate(room);
    polylines.extend(agent_lines);
    PolylineBatch { polylines }
}

fn agent_polyline(world: &WorldState, idx: usize, ego: &Pose) -> Polyline {
    let now = world.tick;
    let hist = if idx == 0 { world.histories[0].iter().copied().collect() } else { world.histories[idx].visible_suffix() };
    let nodes = hist
        .iter()
        .map(|s| {
            let p = ego.to_local(Vec2::new(s.x, s.y));
            [p.x, p.y, s.v, ego.heading_to_local(s.psi), (s.tick as f64 - now as f64) * TICK]
        })
        .collect();
    Polyline { kind: PolylineKind::Agent, nodes, valid: true }
}

fn lane_polylines(world: &WorldState, vr: &Polygon, ego: &Pose) -> Vec<Polyline> {
    let range = world.sensor.sensor_range + 1e-6;
    let mut out = Vec::new();
    for lane in &world.map.lanes {
        let pts = lane.resample(LANE_SPACING);
        let mut run: Vec<Vec2> = Vec::new();
        let mut flush = |run: &mut Vec<Vec2>| {
            for chunk_start in (0..run.len().saturating_sub(1)).step_by(MAX_NODES) {
                let end = (chunk_start + MAX_NODES).min(run.len() - 1);
                let nodes = (chunk_start..end)
                    .map(|i| {
                        let (a, b) = (ego.to_local(run[i]), ego.to_local(run[i + 1]));
                        [a.x, a.y, b.x, b.y, 0.0]
                    })
                    .collect();
                out.push(Polyline { kind: PolylineKind::Lane, nodes, valid: true });
            }
            run.clear();
        };
        for &(_, p) in &pts {
            if p.distance(ego.position) <= range && point_in_polygon(p, vr) {
                run.push(p);
            } else {
                flush(&mut run);
            }
        }
        flush(&mut run);
    }
    out
}

/// Ego-centered occupancy grid, one polyline per pair of cell rows. Node
/// features: `(x, y, visible, drivable, occupied)`.
pub fn occupancy_grid(world: &WorldState) -> PolylineBatch {
    let ego = world.ego().pose;
    let vr = world.visible_region();
    let boxes: Vec<_> = (1..world.agents.len())
        .filter(|&i| world.is_visible(i))
        .map(|i| world.agents[i].footprint().to_polygon())
        .collect();
    let half = GRID_SIZE as f64 * GRID_CELL / 2.0;
    let mut polylines = Vec::with_capacity(MAX_POLYLINES);
    for band in 0..MAX_POLYLINES {
        let mut nodes = Vec::with_capacity(MAX_NODES);
        for r in (2 * band)..(2 * band + 2) {
            for c in 0..GRID_SIZE {
                let local = Vec2::new(-half + (c as f64 + 0.5) * GRID_CELL, -half + (r as f64 + 0.5) * GRID_CELL);
                let p = ego.to_world(local);
                let visible = point_in_polygon(p, vr);
                let drivable = point_in_polygon(p, &world.map.drivable);
                let occupied = visible && boxes.iter().any(|b| point_in_polygon(p, b));
                nodes.push([local.x, local.y, visible as u8 as f64, drivable as u8 as f64, occupied as u8 as f64]);
            }
        }
        polylines.push(Polyline { kind: PolylineKind::Grid, nodes, valid: true });
    }
    PolylineBatch { polylines }
}

#[derive(PartialEq)]
struct Candidate {
    err: f64,
    idx: usize,
    stamp: u64,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on error, ties by index
        o.err.total_cmp(&self.err).then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Greedy vertex decimation down to `max_segments` edges. The vertex whose
/// removal moves the boundary least goes first; vertex 0 is kept and
/// removals that would make the boundary self-intersect are skipped.
pub fn downsample_polygon(poly: &Polygon, max_segments: usize) -> Polygon {
    assert!(max_segments >= 8, "max_segments must be at least 8");
    let v = poly.vertices();
    let n = v.len();
    if n <= max_segments {
        return poly.clone();
    }
    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut alive = vec![true; n];
    let mut stamp = vec![0u64; n];
    // quantized so that rounding noise (e.g. from rotating the scene) cannot reorder near-ties
    let err = |i: usize, prev: &[usize], next: &[usize]| {
        (crate::geom2d::segment_distance(v[i], v[prev[i]], v[next[i]]) * 1e7).round()
    };
    let mut heap: BinaryHeap<Candidate> = (1..n).map(|i| Candidate { err: err(i, &prev, &next), idx: i, stamp: 0 }).collect();
    let mut remaining = n;
    let mut skipped: Vec<Candidate> = Vec::new();

    while remaining > max_segments {
        let Some(c) = heap.pop() else {
            if skipped.is_empty() {
                break;
            }
            // every candidate was blocked; retry the blocked ones once more
            heap.extend(skipped.drain(..).map(|c| Candidate { stamp: stamp[c.idx], ..c }));
            if let Some(c) = heap.pop() {
                let i = c.idx;
                remove(i, &mut prev, &mut next, &mut alive);
                remaining -= 1;
                for j in [prev[i], next[i]] {
                    if j != 0 {
                        stamp[j] += 1;
                        heap.push(Candidate { err: err(j, &prev, &next), idx: j, stamp: stamp[j] });
                    }
                }
            }
            continue;
        };
        let i = c.idx;
        if !alive[i] || c.stamp != stamp[i] {
            continue;
        }
        let (a, b) = (v[prev[i]], v[next[i]]);
        let (lo, hi) = (Vec2::new(a.x.min(b.x) - 1e-12, a.y.min(b.y) - 1e-12), Vec2::new(a.x.max(b.x) + 1e-12, a.y.max(b.y) + 1e-12));
        let blocked = {
            let mut k = next[next[i]];
            let mut hit = false;
            while k != prev[i] && !hit {
                let (p, q) = (v[prev[k]], v[k]);
                let overlaps = p.x.max(q.x) >= lo.x && p.x.min(q.x) <= hi.x && p.y.max(q.y) >= lo.y && p.y.min(q.y) <= hi.y;
                if overlaps && prev[k] != next[i] && segments_intersect(a, b, p, q) {
                    hit = true;
                }
                k = next[k];
            }
            hit
        };
        if blocked {
            skipped.push(c);
            continue;
        }
        remove(i, &mut prev, &mut next, &mut alive);
        remaining -= 1;
        for j in [prev[i], next[i]] {
            if j != 0 {
                stamp[j] += 1;
                heap.push(Candidate { err: err(j, &prev, &next), idx: j, stamp: stamp[j] });
            }
        }
        // neighbours changed; blocked candidates may now be valid
        heap.extend(skipped.drain(..).filter(|s| alive[s.idx] && s.stamp == stamp[s.idx]));
    }

    let mut out = Vec::with_capacity(remaining);
    let mut k = 0;
    loop {
        out.push(v[k]);
        k = next[k];
        if k == 0 {
            break;
        }
    }
    Polygon::new(out).unwrap_or_else(|_| poly.clone())
}

fn remove(i: usize, prev: &mut [usize], next: &mut [usize], alive: &mut [bool]) {
    let (p, q) = (prev[i], next[i]);
    next[p] = q;
    prev[q] = p;
    alive[i] = false;
}

/// Writes one observation per line.
pub fn write_jsonl<W: Write>(mut w: W, batches: &[PolylineBatch]) -> io::Result<()> {
    for b in batches {
        serde_json::to_writer(&mut w, b)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Vec<PolylineBatch>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::{visibility_polygon, ReferencePath};
    use crate::world::{AgentState, MapData, Role};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn ego_agent(pose: Pose) -> AgentState {
        AgentState { id: 0, pose, speed: 5.0, accel: 0.0, length: 4.5, width: 1.9, role: Role::Ego, follower: None }
    }

    fn lane_world(rot: f64, lane_len: f64) -> WorldState {
        let r = |p: Vec2| p.rotate(rot);
        let lane = ReferencePath::straight(r(Vec2::new(-5.0, 0.0)), r(Vec2::new(-5.0 + lane_len, 0.0)), 2.0, 3.5).unwrap();
        let drivable = Polygon::new(
            [Vec2::new(-60.0, -60.0), Vec2::new(60.0, -60.0), Vec2::new(60.0, 60.0), Vec2::new(-60.0, 60.0)]
                .map(r)
                .to_vec(),
        )
        .unwrap();
        let occ = Polygon::new([Vec2::new(10.0, 5.0), Vec2::new(14.0, 5.0), Vec2::new(14.0, 9.0), Vec2::new(10.0, 9.0)].map(r).to_vec()).unwrap();
        let map = Arc::new(MapData { lanes: vec![lane], drivable, ego_route: 0 });
        WorldState::new(vec![ego_agent(Pose::new(r(Vec2::new(0.0, 0.0)), rot))], vec![occ], map, Default::default())
    }

    #[test]
    fn ego_frame_and_empty_agents() {
        let w = lane_world(0.3, 10.0);
        let b = vectorize(&w, &ObsConfig::default());
        let ego_line = b.polylines.iter().find(|p| p.kind == PolylineKind::Agent).unwrap();
        let last = ego_line.nodes.last().unwrap();
        assert!(last[0].abs() < 1e-12 && last[1].abs() < 1e-12 && last[3].abs() < 1e-12);
        assert_eq!(b.count(PolylineKind::Agent), 1);
        assert_eq!(b.count(PolylineKind::VisibleRegion), 1);
        let padded = b.padded();
        for (p, m) in padded.node_mask.iter().enumerate() {
            for (n, &valid) in m.iter().enumerate() {
                if !valid {
                    assert_eq!(padded.features[p][n], [0.0; FEATURE_DIM]);
                }
            }
        }
    }

    #[test]
    fn lane_resampling_chain() {
        let w = lane_world(0.0, 10.0);
        let b = vectorize(&w, &ObsConfig::default());
        let lanes: Vec<_> = b.valid_polylines().filter(|p| p.kind == PolylineKind::Lane).collect();
        assert_eq!(lanes.len(), 1);
        assert_eq!(lanes[0].nodes.len(), 5);
        for p in b.valid_polylines().filter(|p| p.kind != PolylineKind::Agent) {
            for pair in p.nodes.windows(2) {
                assert_eq!((pair[0][2], pair[0][3]), (pair[1][0], pair[1][1]));
            }
        }
    }

    #[test]
    fn rotation_equivariance() {
        let a = vectorize(&lane_world(0.0, 40.0), &ObsConfig::default());
        for rot in [0.7, -2.0, PI] {
            let b = vectorize(&lane_world(rot, 40.0), &ObsConfig::default());
            assert_eq!(a.polylines.len(), b.polylines.len());
            for (pa, pb) in a.polylines.iter().zip(&b.polylines) {
                assert_eq!(pa.kind, pb.kind);
                assert_eq!(pa.nodes.len(), pb.nodes.len(), "{:?}", pa.kind);
                for (na, nb) in pa.nodes.iter().zip(&pb.nodes) {
                    for k in 0..FEATURE_DIM {
                        assert!((na[k] - nb[k]).abs() < 1e-6, "{rot}: {na:?} vs {nb:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn no_vr_masks_the_boundary() {
        let w = lane_world(0.0, 10.0);
        let b = vectorize(&w, &ObsConfig { include_vr: false, ..Default::default() });
        let vr = &b.polylines[0];
        assert_eq!(vr.kind, PolylineKind::VisibleRegion);
        assert!(!vr.valid && vr.nodes.is_empty());
    }

    #[test]
    fn decimation_examples() {
        let sq = Polygon::rect(Vec2::ZERO, Vec2::new(1.0, 1.0));
        assert_eq!(downsample_polygon(&sq, 8), sq);
        let disk = visibility_polygon(Vec2::ZERO, &[], 50.0, 720).unwrap();
        let d = downsample_polygon(&disk, 64);
        assert_eq!(d.len(), 64);
        assert_eq!(d.vertices()[0], disk.vertices()[0]);
        assert!((d.area() - PI * 2500.0).abs() / (PI * 2500.0) < 0.02);
    }

    #[test]
    fn grid_observation_shape() {
        let w = lane_world(0.0, 10.0);
        let g = occupancy_grid(&w);
        assert_eq!(g.polylines.len(), MAX_POLYLINES);
        assert!(g.polylines.iter().all(|p| p.nodes.len() == MAX_NODES));
    }

    #[test]
    fn jsonl_round_trip() {
        let w = lane_world(0.2, 30.0);
        let batches = vec![vectorize(&w, &ObsConfig::default()), occupancy_grid(&w)];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &batches).unwrap();
        assert_eq!(read_jsonl(&buf[..]).unwrap(), batches);
    }
}
