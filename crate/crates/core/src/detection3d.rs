//! Monocular 3D box recovery from 2D detections.
//!
//! The tight-enclosure constraint assumes every projected 3D box touches all
//! four sides of its 2D box, which turns each side into one equation linear
//! in the box translation. With estimated dimensions and orientation as
//! inputs, the translation is recovered by enumerating every assignment of
//! a box corner to a box side (8⁴ = 4096 configurations), solving each 4×3
//! system in the least-squares sense, and keeping the candidate whose
//! reprojection matches the input box best.
//!
//! Camera frame: x right, y down, z forward. Boxes rotate about the camera
//! y axis. Corner indices use a fixed bit pattern over the object-frame
//! offset signs: bit 0 → +x (length d_x), bit 1 → +y (height d_z, downward),
//! bit 2 → +z (width d_y). Corner 0 is (−d_x/2, −d_z/2, −d_y/2).

use crate::kinematics::normalize_angle;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Detection3dError {
    #[error("box corner behind the camera (z <= 0)")]
    BehindCamera,
    #[error("no valid corner-to-side configuration")]
    NoValidConfiguration,
    #[error("dimensions must be positive, got [{0}, {1}, {2}]")]
    InvalidDims(f64, f64, f64),
    #[error("invalid 2D box: min must be strictly below max")]
    InvalidBox2D,
    #[error("invalid intrinsics: focal lengths must be positive")]
    InvalidIntrinsics,
    #[error("detection line {line}: {msg}")]
    DetectionParse { line: usize, msg: String },
}

/// Pinhole parameters (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, Detection3dError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Detection3dError::InvalidIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Project a camera-frame point; caller guarantees z > 0.
    fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// Pixel-space rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, Detection3dError> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Detection3dError::InvalidBox2D);
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn center_u(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }
}

/// 7-parameter 3D box in the camera frame.
///
/// `t` is the box center (m), `dims` is `[d_x length, d_y width, d_z height]`
/// (m), `yaw` rotates about the camera y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub t: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
}

/// Observation-angle-relative yaw, normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOrientation(f64);

impl LocalOrientation {
    pub fn new(alpha: f64) -> Self {
        Self(normalize_angle(alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }
}

/// A 2D detection plus the upstream 3D estimates it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub box2d: Box2D,
    /// [length, width, height] in meters.
    pub dims: [f64; 3],
    pub alpha: LocalOrientation,
}

/// 8 projected corners (fixed bit-pattern order) plus their tight bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBox {
    pub corners: [(f64, f64); 8],
    pub tight: Box2D,
}

fn rotation_y(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Object-frame corner offsets in the fixed bit-pattern order.
fn corner_offsets(dims: [f64; 3]) -> [Vector3<f64>; 8] {
    let [dx, dy, dz] = dims;
    std::array::from_fn(|i| {
        let sx = if i & 1 != 0 { 1.0 } else { -1.0 };
        let sy = if i & 2 != 0 { 1.0 } else { -1.0 };
        let sz = if i & 4 != 0 { 1.0 } else { -1.0 };
        Vector3::new(sx * dx / 2.0, sy * dz / 2.0, sz * dy / 2.0)
    })
}

fn check_dims(dims: [f64; 3]) -> Result<(), Detection3dError> {
    if dims.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Detection3dError::InvalidDims(dims[0], dims[1], dims[2]));
    }
    Ok(())
}

/// Convert a local orientation into a global (camera-frame) yaw by adding
/// the ray angle through the 2D box center: θ_ray = atan2(u_center − cx, fx).
pub fn global_yaw(alpha: LocalOrientation, box2d: &Box2D, k: &CameraIntrinsics) -> f64 {
    let theta_ray = (box2d.center_u() - k.cx).atan2(k.fx);
    normalize_angle(alpha.alpha() + theta_ray)
}

/// Project all 8 corners and take their tight pixel bound.
pub fn project_box(b: &Box3D, k: &CameraIntrinsics) -> Result<ProjectedBox, Detection3dError> {
    check_dims(b.dims)?;
    let r = rotation_y(b.yaw);
    let t = Vector3::new(b.t[0], b.t[1], b.t[2]);
    let mut corners = [(0.0, 0.0); 8];
    let (mut u_min, mut u_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, off) in corner_offsets(b.dims).iter().enumerate() {
        let p = r * off + t;
        if p.z <= 0.0 {
            return Err(Detection3dError::BehindCamera);
        }
        let (u, v) = k.project(&p);
        corners[i] = (u, v);
        u_min = u_min.min(u);
        u_max = u_max.max(u);
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }
    Ok(ProjectedBox {
        corners,
        tight: Box2D::new(u_min, v_min, u_max, v_max)?,
    })
}

/// Sum of absolute side differences between two pixel boxes.
fn side_error(a: &Box2D, b: &Box2D) -> f64 {
    (a.x_min - b.x_min).abs()
        + (a.x_max - b.x_max).abs()
        + (a.y_min - b.y_min).abs()
        + (a.y_max - b.y_max).abs()
}

/// Recover the box translation from the tight-enclosure constraint.
///
/// Enumerates all 4096 corner-to-side assignments (configuration index =
/// ((c_xmin·8 + c_xmax)·8 + c_ymin)·8 + c_ymax, iterated ascending; ties
/// broken by the lowest index), solves the 4×3 least-squares system per
/// configuration and keeps the candidate with t_z > 0 whose reprojected
/// tight box is closest to the input. Returns the translation and that
/// pixel-space side error.
pub fn solve_translation(
    box2d: &Box2D,
    dims: [f64; 3],
    yaw: f64,
    k: &CameraIntrinsics,
) -> Result<([f64; 3], f64), Detection3dError> {
    check_dims(dims)?;
    let r = rotation_y(yaw);
    let rotated: Vec<Vector3<f64>> = corner_offsets(dims).iter().map(|c| r * c).collect();

    // Row coefficients per (side, corner): a·t = b.
    // u-side: fx·t_x + (cx − u)·t_z = −(fx·r_x + (cx − u)·r_z)
    // v-side: fy·t_y + (cy − v)·t_z = −(fy·r_y + (cy − v)·r_z)
    let sides = [
        (true, box2d.x_min),
        (true, box2d.x_max),
        (false, box2d.y_min),
        (false, box2d.y_max),
    ];
    let mut rows = [[(Vector3::zeros(), 0.0); 8]; 4];
    for (si, &(horizontal, value)) in sides.iter().enumerate() {
        for (ci, rc) in rotated.iter().enumerate() {
            let (a, b) = if horizontal {
                let coeff = k.cx - value;
                (
                    Vector3::new(k.fx, 0.0, coeff),
                    -(k.fx * rc.x + coeff * rc.z),
                )
            } else {
                let coeff = k.cy - value;
                (
                    Vector3::new(0.0, k.fy, coeff),
                    -(k.fy * rc.y + coeff * rc.z),
                )
            };
            rows[si][ci] = (a, b);
        }
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for c0 in 0..8 {
        for c1 in 0..8 {
            for c2 in 0..8 {
                for c3 in 0..8 {
                    let picks = [c0, c1, c2, c3];
                    // Normal equations of the 4×3 system.
                    let mut ata = Matrix3::zeros();
                    let mut atb = Vector3::zeros();
                    for (si, &ci) in picks.iter().enumerate() {
                        let (a, b) = rows[si][ci];
                        ata += a * a.transpose();
                        atb += a * b;
                    }
                    let Some(inv) = ata.try_inverse() else {
                        continue;
                    };
                    let t = inv * atb;
                    if !(t.z > 0.0) || !t.iter().all(|v| v.is_finite()) {
                        continue;
                    }
                    let candidate = Box3D {
                        t: [t.x, t.y, t.z],
                        dims,
                        yaw,
                    };
                    let Ok(proj) = project_box(&candidate, k) else {
                        continue;
                    };
                    let err = side_error(&proj.tight, box2d);
                    if best.map_or(true, |(_, be)| err < be) {
                        best = Some((candidate.t, err));
                    }
                }
            }
        }
    }
    best.ok_or(Detection3dError::NoValidConfiguration)
}

/// Lift a 2D detection into a 3D box: converts the local orientation to a
/// global yaw, solves for the translation, and reports the reprojection
/// side error in pixels.
pub fn lift_box(det: &Detection, k: &CameraIntrinsics) -> Result<(Box3D, f64), Detection3dError> {
    let yaw = global_yaw(det.alpha, &det.box2d, k);
    let (t, err) = solve_translation(&det.box2d, det.dims, yaw, k)?;
    Ok((
        Box3D {
            t,
            dims: det.dims,
            yaw,
        },
        err,
    ))
}

/// One line of the detection input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: u64,
    pub class: String,
    pub box2d: [f64; 4],
    pub dims_lwh: [f64; 3],
    pub alpha: f64,
}

/// One line of the lifted-box output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedBoxRecord {
    pub frame: u64,
    pub class: String,
    pub t: [f64; 3],
    pub dims_lwh: [f64; 3],
    pub yaw: f64,
    pub reproj_err_px: f64,
}

/// Parse a detections JSONL document (one record per non-empty line).
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, Detection3dError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Detection3dError::DetectionParse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

impl DetectionRecord {
    pub fn detection(&self) -> Result<Detection, Detection3dError> {
        Ok(Detection {
            box2d: Box2D::new(self.box2d[0], self.box2d[1], self.box2d[2], self.box2d[3])?,
            dims: self.dims_lwh,
            alpha: LocalOrientation::new(self.alpha),
        })
    }
}
