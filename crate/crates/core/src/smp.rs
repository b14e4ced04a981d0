//! Semantic motion primitives in the Frenet frame.
//!
//! Longitudinal motion is a velocity-keeping quartic (no end-position
//! constraint), lateral motion a quintic reaching a target offset. Both are
//! solved in closed form from start and end conditions.

use serde::{Deserialize, Serialize};

/// Primitive duration in seconds.
pub const PRIMITIVE_DURATION: f64 = 3.0;
/// Interpolation step, shared with the simulation tick.
pub const SAMPLE_DT: f64 = 0.1;
pub const N_SAMPLES: usize = 31;

/// Start conditions taken from the current ego Frenet state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryStart {
    pub d_xs: f64,
    pub v_xs: f64,
    pub a_xs: f64,
    pub d_ys: f64,
    pub v_ys: f64,
    pub a_ys: f64,
}

/// Target end conditions. The policy only varies `v_xe` and `d_ye`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryEnd {
    pub v_xe: f64,
    pub a_xe: f64,
    pub d_ye: f64,
    pub v_ye: f64,
    pub a_ye: f64,
}

impl BoundaryEnd {
    pub fn new(v_xe: f64, d_ye: f64) -> Self {
        Self { v_xe, d_ye, ..Default::default() }
    }
}

/// Position, velocity and acceleration along both Frenet axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrenetState {
    pub s: f64,
    pub s_d: f64,
    pub s_dd: f64,
    pub d: f64,
    pub d_d: f64,
    pub d_dd: f64,
}

impl FrenetState {
    pub fn speed(&self) -> f64 {
        self.s_d.hypot(self.d_d)
    }

    pub fn as_start(&self) -> BoundaryStart {
        BoundaryStart {
            d_xs: self.s,
            v_xs: self.s_d,
            a_xs: self.s_dd,
            d_ys: self.d,
            v_ys: self.d_d,
            a_ys: self.d_dd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    /// x(t) = sum lon[i] t^i
    pub lon: [f64; 5],
    /// y(t) = sum lat[i] t^i
    pub lat: [f64; 6],
    pub duration: f64,
    pub start: BoundaryStart,
    pub end: BoundaryEnd,
    /// States at t = k * SAMPLE_DT, k = 0..=duration/SAMPLE_DT.
    pub samples: Vec<FrenetState>,
}

/// Value, first and second derivative of `sum c[i] t^i` (Horner).
fn poly_eval(c: &[f64], t: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut ddp = 0.0;
    for &ci in c.iter().rev() {
        ddp = ddp * t + 2.0 * dp;
        dp = dp * t + p;
        p = p * t + ci;
    }
    (p, dp, ddp)
}

impl MotionPrimitive {
    pub fn eval(&self, t: f64) -> FrenetState {
        let (s, s_d, s_dd) = poly_eval(&self.lon, t);
        let (d, d_d, d_dd) = self.lateral(t);
        FrenetState { s, s_d, s_dd, d, d_d, d_dd }
    }

    /// Lateral quintic in the quintic Hermite basis over u = t / T. Same
    /// polynomial as `lat`, but rest-to-rest moves hit d_ye / 2 exactly at
    /// the midpoint.
    fn lateral(&self, t: f64) -> (f64, f64, f64) {
        let tt = self.duration;
        let u = t / tt;
        let w = 1.0 - u;
        let (u2, u3) = (u * u, u * u * u);
        let h3 = u3 * (10.0 + u * (-15.0 + 6.0 * u));
        let h = [
            1.0 - h3,
            u - u3 * (6.0 + u * (-8.0 + 3.0 * u)),
            0.5 * u2 * w * w * w,
            h3,
            -u3 * (4.0 + u * (-7.0 + 3.0 * u)),
            0.5 * u3 * w * w,
        ];
        let h3d = 30.0 * u2 * w * w;
        let hd = [
            -h3d,
            1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u2 * u2,
            0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u2 * u2),
            h3d,
            -12.0 * u2 + 28.0 * u3 - 15.0 * u2 * u2,
            0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u2 * u2),
        ];
        let h3dd = 60.0 * u * w * (1.0 - 2.0 * u);
        let hdd = [
            -h3dd,
            -36.0 * u + 96.0 * u2 - 60.0 * u3,
            1.0 - 9.0 * u + 18.0 * u2 - 10.0 * u3,
            h3dd,
            -24.0 * u + 84.0 * u2 - 60.0 * u3,
            3.0 * u - 12.0 * u2 + 10.0 * u3,
        ];
        let (st, en) = (&self.start, &self.end);
        let k = [st.d_ys, st.v_ys * tt, st.a_ys * tt * tt, en.d_ye, en.v_ye * tt, en.a_ye * tt * tt];
        let dot = |b: &[f64; 6]| b.iter().zip(&k).map(|(x, y)| x * y).sum::<f64>();
        (dot(&h), dot(&hd) / tt, dot(&hdd) / (tt * tt))
    }

    pub fn lon_jerk(&self, t: f64) -> f64 {
        6.0 * self.lon[3] + 24.0 * self.lon[4] * t
    }

    /// Times in (0, duration) where longitudinal or lateral acceleration is extremal.
    fn accel_extrema(&self) -> Vec<f64> {
        let mut ts = Vec::new();
        // lon accel is quadratic: 2a2 + 6a3 t + 12a4 t^2
        if self.lon[4].abs() > 1e-15 {
            ts.push(-6.0 * self.lon[3] / (24.0 * self.lon[4]));
        }
        // lat accel is cubic; its derivative 6b3 + 24b4 t + 60b5 t^2
        let (qa, qb, qc) = (60.0 * self.lat[5], 24.0 * self.lat[4], 6.0 * self.lat[3]);
        if qa.abs() > 1e-15 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                ts.push((-qb - sq) / (2.0 * qa));
                ts.push((-qb + sq) / (2.0 * qa));
            }
        } else if qb.abs() > 1e-15 {
            ts.push(-qc / qb);
        }
        ts.retain(|t| *t > 0.0 && *t < self.duration);
        ts
    }
}

/// Closed-form solution of the boundary-value problem.
pub fn solve_primitive(start: &BoundaryStart, end: &BoundaryEnd, duration: f64) -> MotionPrimitive {
    assert!(duration > 0.0, "primitive duration must be positive");
    let t = duration;
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));

    let a0 = start.d_xs;
    let a1 = start.v_xs;
    let a2 = 0.5 * start.a_xs;
    let b1 = end.v_xe - a1 - 2.0 * a2 * t;
    let b2 = end.a_xe - 2.0 * a2;
    let a3 = (3.0 * b1 - t * b2) / (3.0 * t2);
    let a4 = (t * b2 - 2.0 * b1) / (4.0 * t3);

    let c0 = start.d_ys;
    let c1 = start.v_ys;
    let c2 = 0.5 * start.a_ys;
    let h0 = end.d_ye - c0 - c1 * t - c2 * t2;
    let h1 = end.v_ye - c1 - 2.0 * c2 * t;
    let h2 = end.a_ye - 2.0 * c2;
    let c3 = (10.0 * h0 - 4.0 * h1 * t + 0.5 * h2 * t2) / t3;
    let c4 = (-15.0 * h0 + 7.0 * h1 * t - h2 * t2) / t4;
    let c5 = (6.0 * h0 - 3.0 * h1 * t + 0.5 * h2 * t2) / t5;

    let mut prim = MotionPrimitive {
        lon: [a0, a1, a2, a3, a4],
        lat: [c0, c1, c2, c3, c4, c5],
        duration,
        start: *start,
        end: *end,
        samples: Vec::new(),
    };
    let n = (duration / SAMPLE_DT).round() as usize;
    prim.samples = (0..=n).map(|k| prim.eval(k as f64 * SAMPLE_DT)).collect();
    prim
}

/// Box bounds of the two policy-controlled end conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl ActionBounds {
    pub fn symmetric(v_max: f64, lateral_band: f64) -> Self {
        Self { v_min: 0.0, v_max, d_min: -lateral_band, d_max: lateral_band }
    }
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self::symmetric(15.0, 3.5)
    }
}

/// tanh squash followed by an affine map onto the bounds.
pub fn map_action(raw: [f64; 2], bounds: &ActionBounds) -> BoundaryEnd {
    let squash = |u: f64, lo: f64, hi: f64| lo + 0.5 * (u.tanh() + 1.0) * (hi - lo);
    BoundaryEnd::new(
        squash(raw[0], bounds.v_min, bounds.v_max),
        squash(raw[1], bounds.d_min, bounds.d_max),
    )
}

/// log |det d(map_action)/d(raw)|, the change-of-variables term for densities.
pub fn squash_log_det_jacobian(raw: [f64; 2], bounds: &ActionBounds) -> f64 {
    let term = |u: f64, lo: f64, hi: f64| {
        // log(1 - tanh^2 u) = 2 (ln 2 - u - softplus(-2u)), stable for large |u|
        let log_sech2 = 2.0 * (std::f64::consts::LN_2 - u.abs() - (-2.0 * u.abs()).exp().ln_1p());
        (0.5 * (hi - lo)).ln() + log_sech2
    };
    term(raw[0], bounds.v_min, bounds.v_max) + term(raw[1], bounds.d_min, bounds.d_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityLimits {
    pub max_lon_accel: f64,
    pub max_lat_accel: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Bound on |y''| / max(x'^2, curvature_speed_floor^2).
    pub max_curvature: f64,
    pub curvature_speed_floor: f64,
}

impl Default for FeasibilityLimits {
    fn default() -> Self {
        Self {
            max_lon_accel: 4.0,
            max_lat_accel: 3.0,
            min_speed: 0.0,
            max_speed: 16.0,
            max_curvature: 0.5,
            curvature_speed_floor: 2.0,
        }
    }
}

const FEAS_TOL: f64 = 1e-9;

fn lon_ok(st: &FrenetState, lim: &FeasibilityLimits) -> bool {
    st.s_dd.abs() <= lim.max_lon_accel + FEAS_TOL
        && st.s_d >= lim.min_speed - FEAS_TOL
        && st.s_d <= lim.max_speed + FEAS_TOL
}

fn lat_ok(st: &FrenetState, lim: &FeasibilityLimits) -> bool {
    let floor = lim.curvature_speed_floor * lim.curvature_speed_floor;
    st.d_dd.abs() <= lim.max_lat_accel + FEAS_TOL
        && st.d_dd.abs() / st.s_d.powi(2).max(floor) <= lim.max_curvature + FEAS_TOL
}

fn check_with(prim: &MotionPrimitive, lim: &FeasibilityLimits, lon: bool, lat: bool) -> bool {
    let extra = prim.accel_extrema().into_iter().map(|t| prim.eval(t));
    prim.samples.iter().copied().chain(extra).all(|st| (!lon || lon_ok(&st, lim)) && (!lat || lat_ok(&st, lim)))
}

/// Acceleration, speed and curvature-proxy limits over all samples and the
/// analytic acceleration extrema between them.
pub fn check_feasible(prim: &MotionPrimitive, limits: &FeasibilityLimits) -> bool {
    check_with(prim, limits, true, true)
}

/// Result of pulling an end condition back into the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedPrimitive {
    pub primitive: MotionPrimitive,
    pub requested: BoundaryEnd,
    pub clamped: bool,
    pub feasible: bool,
}

/// Solves the primitive and, when infeasible, moves `v_xe` then `d_ye` toward
/// the start state by bisection until the limits hold.
///
/// If even the start-holding primitive violates a limit (e.g. right after an
/// emergency stop) it is returned with `feasible = false`.
pub fn solve_clamped(
    start: &BoundaryStart,
    requested: &BoundaryEnd,
    duration: f64,
    limits: &FeasibilityLimits,
) -> ClampedPrimitive {
    let prim = solve_primitive(start, requested, duration);
    if check_feasible(&prim, limits) {
        return ClampedPrimitive { primitive: prim, requested: *requested, clamped: false, feasible: true };
    }
    let v_hold = start.v_xs.clamp(limits.min_speed, limits.max_speed);
    let with = |v: f64, d: f64| solve_primitive(start, &BoundaryEnd { v_xe: v, d_ye: d, ..*requested }, duration);

    let mut v = requested.v_xe;
    if !check_with(&with(v, requested.d_ye), limits, true, false) {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if check_with(&with(v_hold + mid * (requested.v_xe - v_hold), requested.d_ye), limits, true, false) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        v = v_hold + lo * (requested.v_xe - v_hold);
    }
    let mut d = requested.d_ye;
    if !check_feasible(&with(v, d), limits) {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if check_feasible(&with(v, start.d_ys + mid * (requested.d_ye - start.d_ys)), limits) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        d = start.d_ys + lo * (requested.d_ye - start.d_ys);
    }
    let primitive = with(v, d);
    let feasible = check_feasible(&primitive, limits);
    ClampedPrimitive { primitive, requested: *requested, clamped: true, feasible }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start(v: f64) -> BoundaryStart {
        BoundaryStart { v_xs: v, ..Default::default() }
    }

    #[test]
    fn velocity_keeping_is_constant_velocity() {
        let p = solve_primitive(&start(10.0), &BoundaryEnd::new(10.0, 0.0), 3.0);
        assert_eq!(p.samples.len(), N_SAMPLES);
        for (k, st) in p.samples.iter().enumerate() {
            let t = k as f64 * SAMPLE_DT;
            assert!((st.s - 10.0 * t).abs() < 1e-12);
            assert_eq!(st.d, 0.0);
        }
    }

    #[test]
    fn rest_to_rest_lane_change_midpoint() {
        let p = solve_primitive(&start(0.0), &BoundaryEnd::new(0.0, 3.5), 3.0);
        assert!((p.eval(1.5).d - 1.75).abs() < 1e-12);
        let e = p.eval(3.0);
        assert!((e.d - 3.5).abs() < 1e-9 && e.d_d.abs() < 1e-9 && e.d_dd.abs() < 1e-9);
    }

    #[test]
    fn action_mapping() {
        let b = ActionBounds::symmetric(15.0, 3.5);
        let mid = map_action([0.0, 0.0], &b);
        assert!((mid.v_xe - 7.5).abs() < 1e-12 && mid.d_ye.abs() < 1e-12);
        let hi = map_action([10.0, 10.0], &b);
        assert!((hi.v_xe - 15.0).abs() < 1e-4 && (hi.d_ye - 3.5).abs() < 1e-4);
        assert_eq!(hi.a_xe, 0.0);
        assert_eq!(hi.v_ye, 0.0);
    }

    #[test]
    fn squash_jacobian_matches_numeric() {
        let b = ActionBounds { v_min: 0.0, v_max: 15.0, d_min: -1.0, d_max: 2.5 };
        for raw in [[0.3, -1.2], [2.0, 0.1], [-3.0, 4.0]] {
            let h = 1e-6;
            let f = |r: [f64; 2]| { let e = map_action(r, &b); [e.v_xe, e.d_ye] };
            let dv = (f([raw[0] + h, raw[1]])[0] - f([raw[0] - h, raw[1]])[0]) / (2.0 * h);
            let dd = (f([raw[0], raw[1] + h])[1] - f([raw[0], raw[1] - h])[1]) / (2.0 * h);
            let numeric = dv.abs().ln() + dd.abs().ln();
            assert!((squash_log_det_jacobian(raw, &b) - numeric).abs() < 1e-6);
        }
        // far tails stay finite
        assert!(squash_log_det_jacobian([40.0, -40.0], &b).is_finite());
    }

    #[test]
    fn feasibility_examples() {
        let lim = FeasibilityLimits::default();
        let cv = solve_primitive(&start(10.0), &BoundaryEnd::new(10.0, 0.0), 3.0);
        assert!(check_feasible(&cv, &lim));
        let lc = solve_primitive(&start(10.0), &BoundaryEnd::new(10.0, 3.5), 3.0);
        assert!(check_feasible(&lc, &lim));
        let launch = solve_primitive(&start(0.0), &BoundaryEnd::new(15.0, 0.0), 3.0);
        assert!(!check_feasible(&launch, &lim));
    }

    #[test]
    fn clamping_lands_on_the_feasible_boundary() {
        let lim = FeasibilityLimits::default();
        let c = solve_clamped(&start(0.0), &BoundaryEnd::new(15.0, 0.0), 3.0, &lim);
        assert!(c.clamped && c.feasible);
        // peak accel of a rest-start quartic is 1.5 dv / T
        assert!((c.primitive.end.v_xe - 8.0).abs() < 1e-6, "{}", c.primitive.end.v_xe);
        let c = solve_clamped(&start(1.0), &BoundaryEnd::new(1.0, 3.5), 3.0, &lim);
        assert!(c.feasible && c.primitive.end.d_ye < 3.5 && c.primitive.end.d_ye > 0.0);
    }
}
