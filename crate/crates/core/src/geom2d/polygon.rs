use super::{closest_on_segment, segments_intersect, Vec2};
use crate::error::GeomError;
use serde::{Deserialize, Serialize};

/// Simple polygon with counterclockwise vertices; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

const AREA_EPS: f64 = 1e-12;

impl Polygon {
    /// Validates vertex count, finiteness and area. Clockwise input is reversed.
    /// Simplicity is not checked here (quadratic); see [`Polygon::is_simple`].
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        dedup_ring(&mut vertices);
        if vertices.len() < 3 {
            return Err(GeomError::InvalidPolygon(format!("{} distinct vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidPolygon("non-finite vertex".into()));
        }
        let a = signed_area(&vertices);
        if a.abs() <= AREA_EPS {
            return Err(GeomError::InvalidPolygon("zero area".into()));
        }
        if a < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Self {
            vertices: vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
        }
    }

    /// Regular `n`-gon, first vertex at angle 0.
    pub fn regular(center: Vec2, radius: f64, n: usize) -> Self {
        let vertices = (0..n)
            .map(|i| center + Vec2::from_angle(2.0 * std::f64::consts::PI * i as f64 / n as f64) * radius)
            .collect();
        Self { vertices }
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for (p, q) in self.edges() {
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Vec2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= -1e-12
        })
    }

    /// No two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let v = &self.vertices;
        for i in 0..n {
            let (a1, a2) = (v[i], v[(i + 1) % n]);
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (b1, b2) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, self)
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| closest_on_segment(p, a, b).0.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translate(&self, d: Vec2) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|&v| v + d).collect() }
    }

    /// Rotation about the origin keeps orientation.
    pub fn rotate(&self, theta: f64) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| v.rotate(theta)).collect() }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Ear-clipping triangulation of a simple CCW polygon.
    pub fn triangulate(&self) -> Vec<Polygon> {
        let v = &self.vertices;
        let mut idx: Vec<usize> = (0..v.len()).collect();
        let mut tris = Vec::with_capacity(v.len().saturating_sub(2));
        let mut guard = 0usize;
        while idx.len() > 3 {
            let m = idx.len();
            let mut clipped = false;
            for k in 0..m {
                let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
                let (a, b, c) = (v[ip], v[ic], v[inx]);
                let turn = (b - a).cross(c - b);
                if turn <= 1e-14 {
                    continue;
                }
                let blocked = idx.iter().any(|&j| {
                    j != ip && j != ic && j != inx && point_in_triangle(v[j], a, b, c)
                });
                if blocked {
                    continue;
                }
                tris.push(Polygon { vertices: vec![a, b, c] });
                idx.remove(k);
                clipped = true;
                break;
            }
            if !clipped {
                // Only collinear leftovers remain.
                guard += 1;
                if guard > 2 {
                    break;
                }
                drop_collinear(v, &mut idx);
            }
        }
        if idx.len() == 3 {
            let (a, b, c) = (v[idx[0]], v[idx[1]], v[idx[2]]);
            if (b - a).cross(c - a) > AREA_EPS {
                tris.push(Polygon { vertices: vec![a, b, c] });
            }
        }
        tris
    }
}

fn drop_collinear(v: &[Vec2], idx: &mut Vec<usize>) {
    let mut k = 0;
    while idx.len() > 3 && k < idx.len() {
        let m = idx.len();
        let (a, b, c) = (v[idx[(k + m - 1) % m]], v[idx[k]], v[idx[(k + 1) % m]]);
        if (b - a).cross(c - b).abs() <= 1e-14 {
            idx.remove(k);
        } else {
            k += 1;
        }
    }
}

fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        s += v[i].cross(v[(i + 1) % n]);
    }
    0.5 * s
}

fn dedup_ring(v: &mut Vec<Vec2>) {
    v.dedup_by(|a, b| a.distance(*b) < 1e-12);
    while v.len() > 1 && v[0].distance(v[v.len() - 1]) < 1e-12 {
        v.pop();
    }
}

/// Even-odd containment; points on the boundary count as inside.
pub fn point_in_polygon(p: Vec2, poly: &Polygon) -> bool {
    let v = poly.vertices();
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[j], v[i]);
        let near = p.x >= a.x.min(b.x) - 1e-9
            && p.x <= a.x.max(b.x) + 1e-9
            && p.y >= a.y.min(b.y) - 1e-9
            && p.y <= a.y.max(b.y) + 1e-9;
        if near && closest_on_segment(p, a, b).0.distance(p) <= 1e-9 {
            return true;
        }
        if (b.y > p.y) != (a.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW `clip`.
fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Option<Polygon> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            return None;
        }
        let (e0, e1) = (clip[i], clip[(i + 1) % m]);
        let edge = e1 - e0;
        let side = |p: Vec2| edge.cross(p - e0);
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let cur = input[j];
            let prev = input[(j + k - 1) % k];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    dedup_ring(&mut out);
    if out.len() < 3 || signed_area(&out) <= AREA_EPS {
        return None;
    }
    Some(Polygon::from_ccw_unchecked(out))
}

/// Intersection of two polygons as a list of simple pieces with disjoint interiors.
///
/// Convex pairs use a single Sutherland-Hodgman pass. Otherwise each
/// non-convex operand is ear-clipped and the convex pieces are clipped
/// pairwise, so the union of the returned pieces is the intersection.
pub fn polygon_clip(a: &Polygon, b: &Polygon) -> Vec<Polygon> {
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    if alo.x > bhi.x || blo.x > ahi.x || alo.y > bhi.y || blo.y > ahi.y {
        return Vec::new();
    }
    if a.is_convex() && b.is_convex() {
        return clip_convex(a.vertices(), b.vertices()).into_iter().collect();
    }
    let pieces = |p: &Polygon| if p.is_convex() { vec![p.clone()] } else { p.triangulate() };
    let pa = pieces(a);
    let pb = pieces(b);
    let mut out = Vec::new();
    for ta in &pa {
        for tb in &pb {
            if let Some(p) = clip_convex(ta.vertices(), tb.vertices()) {
                out.push(p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Polygon {
        Polygon::rect(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0))
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(p.signed_area() > 0.0);
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn containment_basics() {
        let sq = unit_square();
        assert!(point_in_polygon(sq.centroid(), &sq));
        assert!(!point_in_polygon(Vec2::new(2.0, 0.0), &sq));
        assert!(point_in_polygon(Vec2::new(1.0, 0.5), &sq));
        assert!(point_in_polygon(Vec2::new(0.0, 0.0), &sq));
    }

    #[test]
    fn containment_matches_half_plane_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // random convex polygon: sorted angles on a jittered circle
            let n = rng.random_range(3..12);
            let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let verts: Vec<Vec2> = angles.iter().map(|&a| Vec2::from_angle(a) * 5.0).collect();
            let Ok(poly) = Polygon::new(verts) else { continue };
            for _ in 0..50 {
                let p = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
                let oracle = poly.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0);
                assert_eq!(point_in_polygon(p, &poly), oracle, "{p:?}");
            }
        }
    }

    #[test]
    fn clip_self_disjoint_and_offset() {
        let sq = unit_square();
        let me = polygon_clip(&sq, &sq);
        assert_eq!(me.len(), 1);
        assert!((me[0].area() - 1.0).abs() < 1e-12);

        let far = sq.translate(Vec2::new(5.0, 0.0));
        assert!(polygon_clip(&sq, &far).is_empty());

        let shifted = sq.translate(Vec2::new(0.5, 0.0));
        let area: f64 = polygon_clip(&sq, &shifted).iter().map(Polygon::area).sum();
        assert!((area - 0.5).abs() < 1e-9);
    }

    #[test]
    fn nonconvex_clip_area() {
        // L-shape (area 3) against a square covering its corner cell
        let l = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(!l.is_convex());
        let tri_area: f64 = l.triangulate().iter().map(Polygon::area).sum();
        assert!((tri_area - 3.0).abs() < 1e-12);
        let sq = Polygon::rect(Vec2::new(0.5, 0.5), Vec2::new(1.5, 1.5));
        let pieces = polygon_clip(&l, &sq);
        let area: f64 = pieces.iter().map(Polygon::area).sum();
        assert!((area - 0.75).abs() < 1e-9, "{area}");
        assert!(pieces.iter().all(Polygon::is_simple));
    }

    #[test]
    fn simplicity_check() {
        let bowtie = Polygon::from_ccw_unchecked(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(!bowtie.is_simple());
        assert!(unit_square().is_simple());
    }
}
