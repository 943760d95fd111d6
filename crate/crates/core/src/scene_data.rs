//! Scene manifests and the pipeline inputs derived from them.
//!
//! A manifest is one JSON document listing a scene's keyframes (2 Hz, so
//! dt = 0.5 s) with ego poses and front-camera calibration:
//!
//! ```json
//! {"scene_id": "...", "frames": [{"timestamp_us": 0, "image_path": "...",
//!   "ego": {"x": 0.0, "y": 0.0, "z": 0.0, "yaw": 0.0},
//!   "camera": {"fx": 0.0, "fy": 0.0, "cx": 0.0, "cy": 0.0,
//!     "cam_from_ego": {"t": [0,0,0], "q_wxyz": [1,0,0,0]}}}]}
//! ```
//!
//! `cam_from_ego` maps ego-frame points into the camera frame:
//! p_cam = R(q)·p_ego + t. Ego axes are x forward, y leftward, z up; camera
//! axes are x right, y down, z forward. Image paths are relative to the
//! manifest's directory.

use crate::kinematics::{
    differentiate_trajectory, normalize_angle, to_ego_frame, Point2, Pose2D, Trajectory,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Keyframe spacing in seconds.
pub const KEYFRAME_DT: f64 = 0.5;

/// Number of past samples required for a prediction (5 s at 2 Hz).
pub const HISTORY_LEN: usize = 10;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("manifest not found: {0}")]
    ManifestNotFound(String),
    #[error("manifest parse error{}: {msg}", frame.map(|i| format!(" at frames[{i}]")).unwrap_or_default())]
    ManifestParse { frame: Option<usize>, msg: String },
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("insufficient history at anchor {anchor_index} (need {HISTORY_LEN} past keyframes)")]
    InsufficientHistory { anchor_index: usize },
    #[error("insufficient future at anchor {anchor_index} (need {needed} more keyframes)")]
    InsufficientFuture { anchor_index: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl EgoPose {
    pub fn pose2d(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.yaw)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Rigid transform as translation plus a wxyz unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub t: [f64; 3],
    pub q_wxyz: [f64; 4],
}

impl RigidTransform {
    pub fn quaternion_norm(&self) -> f64 {
        self.q_wxyz.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraCalibration {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub cam_from_ego: RigidTransform,
}

impl CameraCalibration {
    pub fn intrinsics(&self) -> Result<crate::detection3d::CameraIntrinsics, SceneError> {
        crate::detection3d::CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
            .map_err(|e| SceneError::ManifestInvalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp_us: i64,
    pub image_path: String,
    pub ego: EgoPose,
    pub camera: CameraCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene_id: String,
    pub frames: Vec<Frame>,
}

/// Ego motion context handed to the prompt builder: ten past samples plus
/// the values at the anchor frame itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoHistory {
    pub dt: f64,
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
    pub current_speed: f64,
    pub current_curvature: f64,
}

/// Load and fully validate a manifest file.
pub fn load_manifest(path: &Path) -> Result<SceneManifest, SceneError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(SceneError::ManifestNotFound(path.display().to_string()))
        }
        Err(e) => {
            return Err(SceneError::ManifestParse {
                frame: None,
                msg: format!("{}: {e}", path.display()),
            })
        }
    };
    parse_manifest(&text)
}

/// Parse and validate a manifest document.
pub fn parse_manifest(text: &str) -> Result<SceneManifest, SceneError> {
    // Two-stage parse so field errors can name the offending frame.
    #[derive(Deserialize)]
    struct RawManifest {
        scene_id: String,
        frames: Vec<serde_json::Value>,
    }
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| SceneError::ManifestParse {
        frame: None,
        msg: e.to_string(),
    })?;
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (i, value) in raw.frames.into_iter().enumerate() {
        let mut frame: Frame =
            serde_json::from_value(value).map_err(|e| SceneError::ManifestParse {
                frame: Some(i),
                msg: e.to_string(),
            })?;
        frame.ego.yaw = normalize_angle(frame.ego.yaw);
        frames.push(frame);
    }
    let manifest = SceneManifest {
        scene_id: raw.scene_id,
        frames,
    };
    validate_manifest(&manifest)?;
    Ok(manifest)
}

fn validate_manifest(m: &SceneManifest) -> Result<(), SceneError> {
    if m.frames.is_empty() {
        return Err(SceneError::ManifestInvalid("no frames".into()));
    }
    for (i, f) in m.frames.iter().enumerate() {
        if f.image_path.is_empty() {
            return Err(SceneError::ManifestInvalid(format!(
                "empty image_path at frame {i}"
            )));
        }
        let norm = f.camera.cam_from_ego.quaternion_norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(SceneError::ManifestInvalid(format!(
                "bad quaternion at frame {i} (norm {norm})"
            )));
        }
        f.camera.intrinsics()?;
    }
    for (i, pair) in m.frames.windows(2).enumerate() {
        let dt_s = (pair[1].timestamp_us - pair[0].timestamp_us) as f64 / 1e6;
        if dt_s <= 0.0 {
            return Err(SceneError::ManifestInvalid(
                "non-monotonic timestamps".into(),
            ));
        }
        if (dt_s - KEYFRAME_DT).abs() > 0.05 {
            return Err(SceneError::ManifestInvalid(format!(
                "bad frame spacing {dt_s:.3}s between frames {i} and {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Serialize a manifest back to its file format.
pub fn manifest_to_json(m: &SceneManifest) -> String {
    let mut out = serde_json::to_string_pretty(m).expect("manifest serializes");
    out.push('\n');
    out
}

/// Derive the ego history at an anchor frame by differentiating the global
/// positions of frames `[anchor−10 ..= anchor]`. The ten samples strictly
/// before the anchor become the history; the anchor's own values become
/// `current_speed` / `current_curvature`.
pub fn ego_history(scene: &SceneManifest, anchor_index: usize) -> Result<EgoHistory, SceneError> {
    if anchor_index < HISTORY_LEN || anchor_index >= scene.frames.len() {
        return Err(SceneError::InsufficientHistory { anchor_index });
    }
    let points: Vec<Point2> = scene.frames[anchor_index - HISTORY_LEN..=anchor_index]
        .iter()
        .map(|f| f.ego.position())
        .collect();
    let d = differentiate_trajectory(&points, KEYFRAME_DT)
        .map_err(|e| SceneError::ManifestInvalid(format!("ego poses not differentiable: {e}")))?;
    let speed = d.profile.speed();
    let curvature = d.profile.curvature();
    Ok(EgoHistory {
        dt: KEYFRAME_DT,
        speed: speed[..HISTORY_LEN].to_vec(),
        curvature: curvature[..HISTORY_LEN].to_vec(),
        current_speed: speed[HISTORY_LEN],
        current_curvature: curvature[HISTORY_LEN],
    })
}

/// Ground-truth future trajectory in the ego frame of the anchor pose:
/// the next `2·horizon_s` keyframes, with the origin prepended as point 0.
pub fn ground_truth_future(
    scene: &SceneManifest,
    anchor_index: usize,
    horizon_s: u32,
) -> Result<Trajectory, SceneError> {
    let n_future = 2 * horizon_s as usize;
    let last = anchor_index + n_future;
    if last >= scene.frames.len() {
        return Err(SceneError::InsufficientFuture {
            anchor_index,
            needed: last + 1 - scene.frames.len(),
        });
    }
    let anchor = scene.frames[anchor_index].ego.pose2d();
    let global: Vec<Point2> = scene.frames[anchor_index + 1..=last]
        .iter()
        .map(|f| f.ego.position())
        .collect();
    let ego = to_ego_frame(&global, anchor)
        .map_err(|e| SceneError::ManifestInvalid(format!("non-finite ego pose: {e}")))?;
    let mut points = Vec::with_capacity(n_future + 1);
    points.push(Point2::new(0.0, 0.0));
    points.extend(ego);
    Ok(Trajectory {
        dt: KEYFRAME_DT,
        points,
    })
}

/// First frame index with both full history and full future, if any.
pub fn first_anchor_index(scene: &SceneManifest, horizon_s: u32) -> Option<usize> {
    let idx = HISTORY_LEN;
    (idx + 2 * horizon_s as usize <= scene.frames.len().saturating_sub(1)).then_some(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn synthetic_manifest(
        scene_id: &str,
        poses: &[(f64, f64, f64)],
    ) -> SceneManifest {
        let frames = poses
            .iter()
            .enumerate()
            .map(|(i, &(x, y, yaw))| Frame {
                timestamp_us: 1_000_000_000 + (i as i64) * 500_000,
                image_path: format!("images/frame_{i:02}.png"),
                ego: EgoPose { x, y, z: 0.0, yaw },
                camera: CameraCalibration {
                    fx: 1266.0,
                    fy: 1266.0,
                    cx: 800.0,
                    cy: 450.0,
                    cam_from_ego: RigidTransform {
                        t: [0.0, 1.51, -1.70],
                        q_wxyz: [0.5, 0.5, -0.5, 0.5],
                    },
                },
            })
            .collect();
        SceneManifest {
            scene_id: scene_id.into(),
            frames,
        }
    }

    fn straight_manifest(n: usize) -> SceneManifest {
        synthetic_manifest(
            "straight",
            &(0..n)
                .map(|i| (i as f64, 0.0, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn loads_valid_manifest() {
        let m = straight_manifest(20);
        let parsed = parse_manifest(&manifest_to_json(&m)).unwrap();
        assert_eq!(parsed.frames.len(), 20);
        assert_eq!(parsed, m);
    }

    #[test]
    fn rejects_equal_timestamps() {
        let mut m = straight_manifest(5);
        m.frames[2].timestamp_us = m.frames[1].timestamp_us;
        let err = parse_manifest(&manifest_to_json(&m)).unwrap_err();
        assert!(err.to_string().contains("non-monotonic timestamps"), "{err}");
    }

    #[test]
    fn missing_intrinsics_names_frame() {
        let m = straight_manifest(4);
        let mut doc: serde_json::Value =
            serde_json::from_str(&manifest_to_json(&m)).unwrap();
        doc["frames"][2]["camera"]
            .as_object_mut()
            .unwrap()
            .remove("fx");
        let err = parse_manifest(&doc.to_string()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frames[2]"), "{msg}");
        assert!(msg.contains("fx"), "{msg}");
    }

    #[test]
    fn rejects_bad_quaternion() {
        let mut m = straight_manifest(4);
        m.frames[1].camera.cam_from_ego.q_wxyz = [1.0, 0.5, 0.0, 0.0];
        let err = parse_manifest(&manifest_to_json(&m)).unwrap_err();
        assert!(err.to_string().contains("bad quaternion at frame 1"), "{err}");
    }

    #[test]
    fn rejects_bad_spacing() {
        let mut m = straight_manifest(4);
        m.frames[3].timestamp_us += 200_000;
        let err = parse_manifest(&manifest_to_json(&m)).unwrap_err();
        assert!(err.to_string().contains("bad frame spacing"), "{err}");
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_manifest(Path::new("/nonexistent/scene.json")).unwrap_err();
        assert!(matches!(err, SceneError::ManifestNotFound(_)));
    }

    #[test]
    fn history_of_straight_constant_velocity() {
        // 1 m per frame at 2 Hz is 2 m/s.
        let m = straight_manifest(21);
        let h = ego_history(&m, 10).unwrap();
        assert_eq!(h.speed.len(), 10);
        assert_eq!(h.curvature.len(), 10);
        for &s in &h.speed {
            assert!((s - 2.0).abs() < 1e-9, "{s}");
        }
        assert!((h.current_speed - 2.0).abs() < 1e-9);
        for &k in &h.curvature {
            assert!(k.abs() < 1e-9);
        }
    }

    #[test]
    fn history_requires_ten_past_frames() {
        let m = straight_manifest(21);
        assert!(matches!(
            ego_history(&m, 3),
            Err(SceneError::InsufficientHistory { anchor_index: 3 })
        ));
    }

    #[test]
    fn history_on_circular_arc() {
        // Circle R = 20 m at 4 m/s: curvature 0.05 (analytic oracle).
        let r = 20.0;
        let v = 4.0;
        let poses: Vec<(f64, f64, f64)> = (0..21)
            .map(|i| {
                let phi = v / r * KEYFRAME_DT * i as f64;
                (r * phi.sin(), r * (1.0 - phi.cos()), phi)
            })
            .collect();
        let m = synthetic_manifest("arc", &poses);
        let h = ego_history(&m, 10).unwrap();
        for &k in &h.curvature {
            assert!((k - 0.05).abs() < 1e-2, "curvature {k}");
        }
        // Chord-length speed at dt = 0.5 on R = 20 carries an O((v·dt/R)²)
        // bias of about 0.01 m/s; keep a little headroom over that.
        for &s in &h.speed {
            assert!((s - 4.0).abs() < 2.5e-2, "speed {s}");
        }
    }

    #[test]
    fn future_of_straight_manifest() {
        let m = straight_manifest(21);
        let t = ground_truth_future(&m, 10, 5).unwrap();
        assert_eq!(t.points.len(), 11);
        for (i, p) in t.points.iter().enumerate() {
            assert!((p.x - i as f64).abs() < 1e-9);
            assert!(p.y.abs() < 1e-9);
        }
    }

    #[test]
    fn future_is_expressed_in_ego_frame() {
        // Same forward motion, but the whole scene heads north: ego x still
        // carries the displacement.
        let poses: Vec<(f64, f64, f64)> = (0..21)
            .map(|i| (0.0, i as f64, PI / 2.0))
            .collect();
        let m = synthetic_manifest("north", &poses);
        let t = ground_truth_future(&m, 10, 5).unwrap();
        for (i, p) in t.points.iter().enumerate() {
            assert!((p.x - i as f64).abs() < 1e-9, "x at {i}: {}", p.x);
            assert!(p.y.abs() < 1e-9);
        }
        // Sanity on the frame convention: the first segment points forward.
        let first = t.points[1];
        assert!(first.y.atan2(first.x).abs() < 0.2);
    }

    #[test]
    fn future_requires_enough_frames() {
        let m = straight_manifest(15);
        assert!(matches!(
            ground_truth_future(&m, 10, 5),
            Err(SceneError::InsufficientFuture { .. })
        ));
    }

    #[test]
    fn anchor_selection() {
        assert_eq!(first_anchor_index(&straight_manifest(21), 5), Some(10));
        assert_eq!(first_anchor_index(&straight_manifest(20), 5), None);
        assert_eq!(first_anchor_index(&straight_manifest(17), 3), Some(10));
    }
}
