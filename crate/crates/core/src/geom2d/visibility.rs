use super::{point_in_polygon, ray_segment, segment_distance, Polygon, Pose, Vec2};
use crate::error::GeomError;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const DEFAULT_N_RAYS: usize = 720;
pub const DEFAULT_SENSOR_RANGE: f64 = 50.0;
/// Angular offset of the extra rays cast on both sides of every occluder corner.
pub const CORNER_RAY_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    pub sensor_range: f64,
    pub n_rays: usize,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self { sensor_range: DEFAULT_SENSOR_RANGE, n_rays: DEFAULT_N_RAYS }
    }
}

/// Visible region from `ego` with the ray fan starting at world angle 0.
pub fn visibility_polygon(
    ego: Vec2,
    occluders: &[Polygon],
    sensor_range: f64,
    n_rays: usize,
) -> Result<Polygon, GeomError> {
    visibility_polygon_oriented(Pose { position: ego, heading: 0.0 }, occluders, sensor_range, n_rays)
}

/// Visible region with the ray fan starting at the pose heading.
///
/// Besides the uniform fan, rays are cast at +/- [`CORNER_RAY_EPS`] around every
/// occluder vertex and every point where an occluder edge crosses the sensor
/// circle, so shadow boundaries are placed exactly. Vertices are returned
/// counterclockwise starting from the ray along the heading.
pub fn visibility_polygon_oriented(
    ego: Pose,
    occluders: &[Polygon],
    sensor_range: f64,
    n_rays: usize,
) -> Result<Polygon, GeomError> {
    if !(sensor_range > 0.0) || !sensor_range.is_finite() {
        return Err(GeomError::DegenerateInput(format!("sensor range {sensor_range}")));
    }
    if n_rays < 36 {
        return Err(GeomError::DegenerateInput(format!("{n_rays} rays, need at least 36")));
    }
    let origin = ego.position;
    if !origin.is_finite() {
        return Err(GeomError::DegenerateInput("non-finite ego position".into()));
    }
    if let Some(i) = occluders.iter().position(|o| point_in_polygon(origin, o)) {
        return Err(GeomError::DegenerateInput(format!("ego inside occluder {i}")));
    }

    let mut edges: Vec<(Vec2, Vec2)> = Vec::new();
    for occ in occluders {
        for (a, b) in occ.edges() {
            if segment_distance(origin, a, b) <= sensor_range {
                edges.push((a, b));
            }
        }
    }

    let start = ego.heading;
    let rel = |theta: f64| (theta - start).rem_euclid(TAU);
    let mut angles: Vec<f64> = (0..n_rays).map(|i| TAU * i as f64 / n_rays as f64).collect();
    let r2 = sensor_range * sensor_range;
    for &(a, b) in &edges {
        for p in [a, b] {
            if (p - origin).norm_sq() <= r2 {
                let th = (p - origin).angle();
                angles.push(rel(th - CORNER_RAY_EPS));
                angles.push(rel(th + CORNER_RAY_EPS));
            }
        }
        for p in circle_crossings(origin, sensor_range, a, b) {
            let th = (p - origin).angle();
            angles.push(rel(th - CORNER_RAY_EPS));
            angles.push(rel(th + CORNER_RAY_EPS));
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut verts = Vec::with_capacity(angles.len());
    for a in angles {
        let dir = Vec2::from_angle(start + a);
        let mut t = sensor_range;
        for &(p, q) in &edges {
            if let Some(h) = ray_segment(origin, dir, p, q) {
                if h < t {
                    t = h;
                }
            }
        }
        let v = origin + dir * t;
        if verts.last().is_none_or(|l: &Vec2| l.distance(v) > 1e-9) {
            verts.push(v);
        }
    }
    while verts.len() > 1 && verts[0].distance(verts[verts.len() - 1]) <= 1e-9 {
        verts.pop();
    }
    if verts.len() < 3 {
        return Err(GeomError::DegenerateInput("visible region collapsed".into()));
    }
    Ok(Polygon::from_ccw_unchecked(verts))
}

fn circle_crossings(c: Vec2, r: f64, a: Vec2, b: Vec2) -> Vec<Vec2> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm_sq();
    if qa == 0.0 {
        return Vec::new();
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.norm_sq() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .map(|t| a + d * t)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square_occluder() -> Polygon {
        Polygon::rect(Vec2::new(10.0, -2.0), Vec2::new(12.0, 2.0))
    }

    #[test]
    fn open_disk_area() {
        let vr = visibility_polygon(Vec2::ZERO, &[], 50.0, 360).unwrap();
        assert_eq!(vr.len(), 360);
        let disk = PI * 50.0 * 50.0;
        assert!((vr.area() - disk).abs() / disk < 1e-3);
        assert!(vr.vertices()[0].distance(Vec2::new(50.0, 0.0)) < 1e-9);
    }

    #[test]
    fn square_casts_shadow() {
        let vr = visibility_polygon(Vec2::ZERO, &[square_occluder()], 50.0, 720).unwrap();
        assert!(!vr.contains(Vec2::new(30.0, 0.0)));
        assert!(vr.contains(Vec2::new(0.0, 30.0)));
        assert!(vr.contains(Vec2::new(9.0, 0.0)));
    }

    #[test]
    fn ego_inside_occluder_is_rejected() {
        let err = visibility_polygon(Vec2::new(11.0, 0.0), &[square_occluder()], 50.0, 720);
        assert!(matches!(err, Err(GeomError::DegenerateInput(_))));
        assert!(visibility_polygon(Vec2::ZERO, &[], 50.0, 10).is_err());
        assert!(visibility_polygon(Vec2::ZERO, &[], 0.0, 360).is_err());
    }

    #[test]
    fn oriented_fan_starts_at_heading() {
        let pose = Pose::new(Vec2::new(1.0, 1.0), 0.8);
        let vr = visibility_polygon_oriented(pose, &[], 20.0, 72).unwrap();
        let first = vr.vertices()[0] - pose.position;
        assert!((first.angle() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn vertices_lie_on_circle_or_edges() {
        let occ = [square_occluder(), Polygon::rect(Vec2::new(-20.0, 5.0), Vec2::new(-15.0, 9.0))];
        let vr = visibility_polygon(Vec2::ZERO, &occ, 50.0, 720).unwrap();
        for &v in vr.vertices() {
            let on_circle = (v.norm() - 50.0).abs() < 1e-6;
            let on_edge = occ.iter().any(|o| o.boundary_distance(v) < 1e-6);
            assert!(on_circle || on_edge, "{v:?}");
        }
        assert!(vr.is_simple());
    }
}
