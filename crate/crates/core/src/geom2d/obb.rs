use super::{Polygon, Pose, Vec2};
use serde::{Deserialize, Serialize};

/// Rectangle of given length (along heading) and width centered on a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn new(pose: Pose, length: f64, width: f64) -> Self {
        Self { center: pose.position, heading: pose.heading, length, width }
    }

    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.heading);
        (u, u.perp())
    }

    /// Counterclockwise corners starting at rear-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let hl = u * (0.5 * self.length);
        let hw = v * (0.5 * self.width);
        let c = self.center;
        [c - hl - hw, c + hl - hw, c + hl + hw, c - hl + hw]
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_ccw_unchecked(self.corners().to_vec())
    }

    pub fn inflated(&self, longitudinal: f64, lateral: f64) -> Self {
        Self {
            length: self.length + 2.0 * longitudinal,
            width: self.width + 2.0 * lateral,
            ..*self
        }
    }

    /// Extends the box forward by `ahead` meters, keeping its rear edge fixed.
    pub fn extended_forward(&self, ahead: f64) -> Self {
        let (u, _) = self.axes();
        Self {
            center: self.center + u * (0.5 * ahead),
            length: self.length + ahead,
            ..*self
        }
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.corners() {
            let d = c.dot(axis);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Separating-axis overlap test; touching boxes overlap.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let (a0, a1) = self.axes();
        let (b0, b1) = other.axes();
        for axis in [a0, a1, b0, b1] {
            let (l1, h1) = self.project(axis);
            let (l2, h2) = other.project(axis);
            if h1 < l2 - 1e-12 || h2 < l1 - 1e-12 {
                return false;
            }
        }
        true
    }
}
