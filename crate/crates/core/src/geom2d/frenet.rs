use super::{closest_on_segment, normalize_angle, Vec2};
use crate::error::GeomError;
use serde::{Deserialize, Serialize};

/// Projections farther than this from the centerline are rejected.
pub const FRENET_MAX_OFFSET: f64 = 20.0;
const MAX_SPACING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetPoint {
    pub s: f64,
    /// Positive to the left of the travel direction.
    pub d: f64,
}

/// Polyline centerline with cumulative arc length.
///
/// Headings are averaged at interior vertices and interpolated linearly in
/// arc length, which makes `(s, d) -> c(s) + d n(s)` continuous across
/// vertices and lets `to_frenet` invert it exactly inside the lane band.
/// Outside `[0, length]` the path is extended along its end tangents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct ReferencePath {
    points: Vec<Vec2>,
    s: Vec<f64>,
    headings: Vec<f64>,
    lane_width: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPath {
    centerline: Vec<Vec2>,
    lane_width: f64,
}

impl TryFrom<RawPath> for ReferencePath {
    type Error = GeomError;
    fn try_from(r: RawPath) -> Result<Self, GeomError> {
        ReferencePath::new(r.centerline, r.lane_width)
    }
}

impl From<ReferencePath> for RawPath {
    fn from(p: ReferencePath) -> Self {
        RawPath { centerline: p.points, lane_width: p.lane_width }
    }
}

impl ReferencePath {
    pub fn new(points: Vec<Vec2>, lane_width: f64) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::DegenerateInput("reference path needs 2 points".into()));
        }
        if !(lane_width > 0.0) {
            return Err(GeomError::DegenerateInput(format!("lane width {lane_width}")));
        }
        let mut s = Vec::with_capacity(points.len());
        s.push(0.0);
        for w in points.windows(2) {
            let len = w[0].distance(w[1]);
            if !(len > 1e-9) {
                return Err(GeomError::DegenerateInput("repeated centerline sample".into()));
            }
            if len > MAX_SPACING + 1e-9 {
                return Err(GeomError::DegenerateInput(format!("centerline spacing {len:.3} m > 2 m")));
            }
            s.push(s.last().unwrap() + len);
        }
        let seg: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).angle()).collect();
        let n = points.len();
        let mut headings = Vec::with_capacity(n);
        headings.push(seg[0]);
        for i in 1..n - 1 {
            let delta = normalize_angle(seg[i] - seg[i - 1]);
            headings.push(normalize_angle(seg[i - 1] + 0.5 * delta));
        }
        headings.push(seg[n - 2]);
        Ok(Self { points, s, headings, lane_width })
    }

    /// Straight segment from `a` to `b` sampled at `spacing` or finer.
    pub fn straight(a: Vec2, b: Vec2, spacing: f64, lane_width: f64) -> Result<Self, GeomError> {
        let len = a.distance(b);
        let n = (len / spacing.min(MAX_SPACING)).ceil().max(1.0) as usize;
        let pts = (0..=n).map(|i| a.lerp(b, i as f64 / n as f64)).collect();
        Self::new(pts, lane_width)
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.points
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn segment_index(&self, s: f64) -> usize {
        match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.s.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        }
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let n = self.points.len();
        if s <= 0.0 {
            return self.points[0] + Vec2::from_angle(self.headings[0]) * s;
        }
        let len = self.length();
        if s >= len {
            return self.points[n - 1] + Vec2::from_angle(self.headings[n - 1]) * (s - len);
        }
        let i = self.segment_index(s);
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.points[i].lerp(self.points[i + 1], t)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let n = self.points.len();
        if s <= 0.0 {
            return self.headings[0];
        }
        if s >= self.length() {
            return self.headings[n - 1];
        }
        let i = self.segment_index(s);
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        let delta = normalize_angle(self.headings[i + 1] - self.headings[i]);
        normalize_angle(self.headings[i] + t * delta)
    }

    /// Signed curvature estimated from the interpolated heading.
    pub fn curvature_at(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= self.length() {
            return 0.0;
        }
        let i = self.segment_index(s);
        normalize_angle(self.headings[i + 1] - self.headings[i]) / (self.s[i + 1] - self.s[i])
    }

    pub fn from_frenet(&self, s: f64, d: f64) -> Vec2 {
        self.point_at(s) + Vec2::from_angle(self.heading_at(s)).perp() * d
    }

    /// Longitudinal residual `(p - c(s)) . t(s)`; nonincreasing near the root.
    fn residual(&self, p: Vec2, s: f64) -> f64 {
        (p - self.point_at(s)).dot(Vec2::from_angle(self.heading_at(s)))
    }

    pub fn to_frenet(&self, p: Vec2) -> Result<FrenetPoint, GeomError> {
        let n = self.points.len();
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..n - 1 {
            let d = closest_on_segment(p, self.points[i], self.points[i + 1]).0.distance(p);
            if d < best.0 {
                best = (d, i);
            }
        }
        let (dist, i) = best;
        if dist > FRENET_MAX_OFFSET {
            return Err(GeomError::ProjectionOutOfRange { x: p.x, y: p.y, distance: dist, limit: FRENET_MAX_OFFSET });
        }
        let len = self.length();
        let s = if self.residual(p, 0.0) <= 0.0 && i == 0 {
            // behind the start: straight extension
            (p - self.points[0]).dot(Vec2::from_angle(self.headings[0]))
        } else if self.residual(p, len) >= 0.0 && i == n - 2 {
            len + (p - self.points[n - 1]).dot(Vec2::from_angle(self.headings[n - 1]))
        } else {
            let lo_i = i.saturating_sub(1);
            let hi_i = (i + 2).min(n - 1);
            let mut lo = self.s[lo_i];
            let mut hi = self.s[hi_i];
            // narrow to the sub-bracket that straddles the root, preferring the nearest segment
            let cand = [(self.s[i], self.s[i + 1]), (lo, self.s[i]), (self.s[i + 1], hi)];
            for (a, b) in cand {
                if self.residual(p, a) >= 0.0 && self.residual(p, b) <= 0.0 {
                    lo = a;
                    hi = b;
                    break;
                }
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.residual(p, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        let d = (p - self.point_at(s)).dot(Vec2::from_angle(self.heading_at(s)).perp());
        Ok(FrenetPoint { s, d })
    }

    /// Points at fixed arc-length spacing from the start, including the end point.
    pub fn resample(&self, spacing: f64) -> Vec<(f64, Vec2)> {
        let len = self.length();
        let n = (len / spacing).floor() as usize;
        let mut out: Vec<(f64, Vec2)> = (0..=n).map(|k| {
            let s = k as f64 * spacing;
            (s, self.point_at(s))
        }).collect();
        if len - n as f64 * spacing > 1e-6 {
            out.push((len, self.point_at(len)));
        }
        out
    }
}
