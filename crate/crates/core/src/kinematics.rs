//! Planar motion math: speed/curvature control profiles to trajectories and
//! back, plus global/ego frame transforms.
//!
//! Heading is the integral of the heading rate `k(t)·s(t)`; position is the
//! integral of the velocity components `(s·cosθ, s·sinθ)`. Both integrals
//! use the cumulative trapezoidal rule. The inverse map recovers speed and
//! curvature from sampled positions with central differences (second-order
//! one-sided stencils at the endpoints, so the round trip stays O(dt²)).
//!
//! Frame conventions: ego x is forward, ego y is leftward, yaw is CCW from
//! the global +x axis and normalized to (−π, π].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Speed below which curvature is forced to zero instead of dividing by a
/// near-zero chord length.
pub const SPEED_GUARD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite input sample")]
    NonFiniteInput,
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("speed and curvature lengths differ: {speed} vs {curvature}")]
    LengthMismatch { speed: usize, curvature: usize },
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("speed samples must be non-negative")]
    NegativeSpeed,
}

/// Normalize an angle to (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a % two_pi;
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

/// A 2D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A 2D pose: global position plus yaw (CCW from global +x, in (−π, π]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    /// Build a pose, normalizing yaw to (−π, π].
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Paired per-timestep speed (m/s) and curvature (1/m) samples at a fixed
/// Δt. Sample `i` is at time `i·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProfile {
    dt: f64,
    speed: Vec<f64>,
    curvature: Vec<f64>,
}

impl ControlProfile {
    /// Validates all invariants: matching lengths ≥ 2, finite samples,
    /// non-negative speeds, positive dt.
    pub fn new(dt: f64, speed: Vec<f64>, curvature: Vec<f64>) -> Result<Self, KinematicsError> {
        if !(dt > 0.0) {
            return Err(KinematicsError::NonPositiveDt(dt));
        }
        if speed.len() != curvature.len() {
            return Err(KinematicsError::LengthMismatch {
                speed: speed.len(),
                curvature: curvature.len(),
            });
        }
        if speed.len() < 2 {
            return Err(KinematicsError::TooFewPoints {
                min: 2,
                got: speed.len(),
            });
        }
        if speed.iter().chain(curvature.iter()).any(|v| !v.is_finite()) {
            return Err(KinematicsError::NonFiniteInput);
        }
        if speed.iter().any(|&s| s < 0.0) {
            return Err(KinematicsError::NegativeSpeed);
        }
        Ok(Self {
            dt,
            speed,
            curvature,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

/// Timestamped 2D waypoints at fixed dt; point 0 is the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<Point2>,
}

/// Result of differentiating a point sequence: the recovered control
/// profile plus the per-point headings (radians, normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct PathDerivatives {
    pub profile: ControlProfile,
    pub headings: Vec<f64>,
}

/// Integrate a control profile into a trajectory.
///
/// Headings: θ_i = θ_{i−1} + (dt/2)·(k_{i−1}s_{i−1} + k_i s_i).
/// Positions: x_i = x_{i−1} + (dt/2)·(v_{x,i−1} + v_{x,i}) with
/// v_{x,i} = s_i cos θ_i (same for y). The output has exactly
/// `profile.len()` points and point 0 equals `origin`.
pub fn integrate_trajectory(
    profile: &ControlProfile,
    theta0: f64,
    origin: Point2,
) -> Result<Trajectory, KinematicsError> {
    if !theta0.is_finite() || !origin.is_finite() {
        return Err(KinematicsError::NonFiniteInput);
    }
    let n = profile.len();
    let s = profile.speed();
    let k = profile.curvature();
    let dt = profile.dt();

    let mut theta = vec![0.0; n];
    theta[0] = theta0;
    for i in 1..n {
        let f_prev = k[i - 1] * s[i - 1];
        let f_cur = k[i] * s[i];
        theta[i] = theta[i - 1] + 0.5 * dt * (f_prev + f_cur);
    }

    let mut points = vec![origin; n];
    let mut vx_prev = s[0] * theta[0].cos();
    let mut vy_prev = s[0] * theta[0].sin();
    for i in 1..n {
        let vx = s[i] * theta[i].cos();
        let vy = s[i] * theta[i].sin();
        points[i] = Point2::new(
            points[i - 1].x + 0.5 * dt * (vx_prev + vx),
            points[i - 1].y + 0.5 * dt * (vy_prev + vy),
        );
        vx_prev = vx;
        vy_prev = vy;
    }

    Ok(Trajectory { dt, points })
}

/// Recover speed, curvature and heading from sampled positions.
///
/// Displacement derivatives use central differences in the interior and
/// second-order one-sided stencils at the endpoints. Heading is the atan2
/// of the displacement derivative; headings are unwrapped before the
/// heading-rate difference. Curvature = heading rate / speed, forced to 0
/// where speed < [`SPEED_GUARD`].
pub fn differentiate_trajectory(
    points: &[Point2],
    dt: f64,
) -> Result<PathDerivatives, KinematicsError> {
    if points.len() < 3 {
        return Err(KinematicsError::TooFewPoints {
            min: 3,
            got: points.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(KinematicsError::NonPositiveDt(dt));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(KinematicsError::NonFiniteInput);
    }

    let n = points.len();
    // Velocity estimates (dx/dt, dy/dt) per sample.
    let mut vel = vec![(0.0f64, 0.0f64); n];
    for i in 0..n {
        vel[i] = if i == 0 {
            (
                (-3.0 * points[0].x + 4.0 * points[1].x - points[2].x) / (2.0 * dt),
                (-3.0 * points[0].y + 4.0 * points[1].y - points[2].y) / (2.0 * dt),
            )
        } else if i == n - 1 {
            (
                (3.0 * points[n - 1].x - 4.0 * points[n - 2].x + points[n - 3].x) / (2.0 * dt),
                (3.0 * points[n - 1].y - 4.0 * points[n - 2].y + points[n - 3].y) / (2.0 * dt),
            )
        } else {
            (
                (points[i + 1].x - points[i - 1].x) / (2.0 * dt),
                (points[i + 1].y - points[i - 1].y) / (2.0 * dt),
            )
        };
    }

    let speed: Vec<f64> = vel.iter().map(|(vx, vy)| vx.hypot(*vy)).collect();
    let headings: Vec<f64> = vel.iter().map(|(vx, vy)| vy.atan2(*vx)).collect();

    // Unwrap headings so differences never jump across the ±π seam.
    let mut unwrapped = vec![0.0; n];
    unwrapped[0] = headings[0];
    for i in 1..n {
        unwrapped[i] = unwrapped[i - 1] + normalize_angle(headings[i] - unwrapped[i - 1]);
    }

    let mut curvature = vec![0.0; n];
    for i in 0..n {
        let rate = if i == 0 {
            (-3.0 * unwrapped[0] + 4.0 * unwrapped[1] - unwrapped[2]) / (2.0 * dt)
        } else if i == n - 1 {
            (3.0 * unwrapped[n - 1] - 4.0 * unwrapped[n - 2] + unwrapped[n - 3]) / (2.0 * dt)
        } else {
            (unwrapped[i + 1] - unwrapped[i - 1]) / (2.0 * dt)
        };
        curvature[i] = if speed[i] < SPEED_GUARD {
            0.0
        } else {
            rate / speed[i]
        };
    }

    Ok(PathDerivatives {
        profile: ControlProfile::new(dt, speed, curvature)?,
        headings,
    })
}

/// Transform global points into the ego frame anchored at `anchor`:
/// output = R(−yaw)·(p − anchor.xy). Ego x is forward, ego y leftward.
pub fn to_ego_frame(global: &[Point2], anchor: Pose2D) -> Result<Vec<Point2>, KinematicsError> {
    if global.iter().any(|p| !p.is_finite()) || !anchor.yaw.is_finite() {
        return Err(KinematicsError::NonFiniteInput);
    }
    let (sin_y, cos_y) = anchor.yaw.sin_cos();
    Ok(global
        .iter()
        .map(|p| {
            let dx = p.x - anchor.x;
            let dy = p.y - anchor.y;
            Point2::new(cos_y * dx + sin_y * dy, -sin_y * dx + cos_y * dy)
        })
        .collect())
}

/// Inverse of [`to_ego_frame`]: ego points back to the global frame.
pub fn from_ego_frame(ego: &[Point2], anchor: Pose2D) -> Result<Vec<Point2>, KinematicsError> {
    if ego.iter().any(|p| !p.is_finite()) || !anchor.yaw.is_finite() {
        return Err(KinematicsError::NonFiniteInput);
    }
    let (sin_y, cos_y) = anchor.yaw.sin_cos();
    Ok(ego
        .iter()
        .map(|p| {
            Point2::new(
                anchor.x + cos_y * p.x - sin_y * p.y,
                anchor.y + sin_y * p.x + cos_y * p.y,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(dt: f64, speed: &[f64], curvature: &[f64]) -> ControlProfile {
        ControlProfile::new(dt, speed.to_vec(), curvature.to_vec()).unwrap()
    }

    #[test]
    fn straight_line_is_exact() {
        let p = profile(0.5, &[2.0; 5], &[0.0; 5]);
        let traj = integrate_trajectory(&p, 0.0, Point2::new(0.0, 0.0)).unwrap();
        let expect = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(traj.points.len(), 5);
        for (pt, ex) in traj.points.iter().zip(expect) {
            assert!((pt.x - ex).abs() < 1e-12);
            assert!(pt.y.abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_profile_stays_at_origin() {
        let p = profile(0.5, &[0.0; 8], &[0.1; 8]);
        let origin = Point2::new(3.0, -2.0);
        let traj = integrate_trajectory(&p, 1.0, origin).unwrap();
        for pt in &traj.points {
            assert_eq!(*pt, origin);
        }
    }

    #[test]
    fn constant_arc_matches_closed_form() {
        // Unit circle: s = 1 m/s, k = 1 1/m, so x(t) = sin t, y(t) = 1 − cos t.
        // At t = 1 s this is (0.841471, 0.459698); frozen from the analytic
        // form before the integrator was written.
        let n = 101;
        let p = profile(0.01, &vec![1.0; n], &vec![1.0; n]);
        let traj = integrate_trajectory(&p, 0.0, Point2::new(0.0, 0.0)).unwrap();
        let last = traj.points.last().unwrap();
        assert!((last.x - 0.841471).abs() < 1e-4, "x = {}", last.x);
        assert!((last.y - 0.459698).abs() < 1e-4, "y = {}", last.y);
    }

    #[test]
    fn integration_rejects_non_finite() {
        let p = profile(0.5, &[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(
            integrate_trajectory(&p, f64::NAN, Point2::new(0.0, 0.0)),
            Err(KinematicsError::NonFiniteInput)
        );
        assert_eq!(
            ControlProfile::new(0.5, vec![1.0, f64::INFINITY], vec![0.0, 0.0]),
            Err(KinematicsError::NonFiniteInput)
        );
    }

    #[test]
    fn zero_curvature_output_is_collinear() {
        let p = profile(0.25, &[3.0, 2.5, 2.0, 1.5, 1.0, 0.5], &[0.0; 6]);
        let traj = integrate_trajectory(&p, 0.7, Point2::new(1.0, 1.0)).unwrap();
        let pts = &traj.points;
        for w in pts.windows(3) {
            let ax = w[1].x - w[0].x;
            let ay = w[1].y - w[0].y;
            let bx = w[2].x - w[1].x;
            let by = w[2].y - w[1].y;
            assert!((ax * by - ay * bx).abs() < 1e-12);
        }
    }

    #[test]
    fn differentiate_collinear_points() {
        let points: Vec<Point2> = (0..12).map(|i| Point2::new(i as f64, 0.0)).collect();
        let d = differentiate_trajectory(&points, 0.5).unwrap();
        for (&s, &k) in d.profile.speed().iter().zip(d.profile.curvature()) {
            assert!((s - 2.0).abs() < 1e-12);
            assert_eq!(k, 0.0);
        }
    }

    #[test]
    fn differentiate_identical_points_hits_speed_guard() {
        let points = vec![Point2::new(4.0, 4.0); 6];
        let d = differentiate_trajectory(&points, 0.5).unwrap();
        assert!(d.profile.speed().iter().all(|&s| s == 0.0));
        assert!(d.profile.curvature().iter().all(|&k| k == 0.0));
    }

    #[test]
    fn differentiate_circle_recovers_speed_and_curvature() {
        // Circle of radius 10 traversed at 5 m/s: curvature 0.1, analytic.
        let r = 10.0;
        let v = 5.0;
        let dt = 0.01;
        let points: Vec<Point2> = (0..200)
            .map(|i| {
                let phi = v / r * dt * i as f64;
                Point2::new(r * phi.sin(), r * (1.0 - phi.cos()))
            })
            .collect();
        let d = differentiate_trajectory(&points, dt).unwrap();
        for &s in d.profile.speed() {
            assert!((s - 5.0).abs() < 1e-3, "speed {s}");
        }
        for &k in d.profile.curvature() {
            assert!((k - 0.1).abs() < 1e-3, "curvature {k}");
        }
    }

    #[test]
    fn differentiate_needs_three_points() {
        let points = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        assert_eq!(
            differentiate_trajectory(&points, 0.5),
            Err(KinematicsError::TooFewPoints { min: 3, got: 2 })
        );
    }

    #[test]
    fn ego_frame_identity_and_rotation() {
        let pts = vec![Point2::new(0.0, 1.0)];
        let id = to_ego_frame(&pts, Pose2D::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(id[0], pts[0]);

        // A point ahead of a north-facing ego is forward.
        let north = to_ego_frame(&pts, Pose2D::new(0.0, 0.0, PI / 2.0)).unwrap();
        assert!((north[0].x - 1.0).abs() < 1e-12);
        assert!(north[0].y.abs() < 1e-12);

        let shifted = to_ego_frame(&[Point2::new(6.0, 5.0)], Pose2D::new(5.0, 5.0, 0.0)).unwrap();
        assert!((shifted[0].x - 1.0).abs() < 1e-12);
        assert!(shifted[0].y.abs() < 1e-12);
    }

    #[test]
    fn integration_roundtrip_smoke() {
        let dt = 0.01;
        let n = 201;
        let speed: Vec<f64> = (0..n)
            .map(|i| 5.0 + (i as f64 * dt * 2.0).sin())
            .collect();
        let curv: Vec<f64> = (0..n)
            .map(|i| 0.1 * (i as f64 * dt * 3.0).cos())
            .collect();
        let p = profile(dt, &speed, &curv);
        let traj = integrate_trajectory(&p, 0.3, Point2::new(2.0, -1.0)).unwrap();
        let d = differentiate_trajectory(&traj.points, dt).unwrap();
        for (a, b) in d.profile.speed().iter().zip(p.speed()) {
            assert!((a - b).abs() < 1e-3, "speed {a} vs {b}");
        }
        for (a, b) in d.profile.curvature().iter().zip(p.curvature()) {
            assert!((a - b).abs() < 1e-2, "curvature {a} vs {b}");
        }
    }

    #[test]
    fn normalize_angle_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((normalize_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn frame_round_trip(
            xs in proptest::collection::vec(-500.0f64..500.0, 1..20),
            ys in proptest::collection::vec(-500.0f64..500.0, 1..20),
            ax in -100.0f64..100.0,
            ay in -100.0f64..100.0,
            yaw in -10.0f64..10.0,
        ) {
            let n = xs.len().min(ys.len());
            let pts: Vec<Point2> = (0..n).map(|i| Point2::new(xs[i], ys[i])).collect();
            let anchor = Pose2D::new(ax, ay, yaw);
            let ego = to_ego_frame(&pts, anchor).unwrap();
            let back = from_ego_frame(&ego, anchor).unwrap();
            for (a, b) in pts.iter().zip(&back) {
                prop_assert!((a.x - b.x).abs() < 1e-9);
                prop_assert!((a.y - b.y).abs() < 1e-9);
            }
        }

        #[test]
        fn ego_transform_preserves_distances(
            xs in proptest::collection::vec(-200.0f64..200.0, 2..12),
            ys in proptest::collection::vec(-200.0f64..200.0, 2..12),
            ax in -50.0f64..50.0,
            ay in -50.0f64..50.0,
            yaw in -4.0f64..4.0,
        ) {
            let n = xs.len().min(ys.len());
            let pts: Vec<Point2> = (0..n).map(|i| Point2::new(xs[i], ys[i])).collect();
            let ego = to_ego_frame(&pts, Pose2D::new(ax, ay, yaw)).unwrap();
            for i in 0..n {
                for j in (i + 1)..n {
                    let before = pts[i].distance(&pts[j]);
                    let after = ego[i].distance(&ego[j]);
                    prop_assert!((before - after).abs() < 1e-9);
                }
            }
        }
    }
}
