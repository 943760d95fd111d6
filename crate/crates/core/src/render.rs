//! SVG figure output: bird's-eye-view trajectory plots and camera-image
//! overlays.
//!
//! Rendering is a pure function of its inputs; identical inputs produce
//! byte-identical documents (all coordinates print with fixed precision).
//! Overlays reference the source image by path instead of embedding pixels,
//! so no image decoding happens here; the canvas size comes from the
//! intrinsics (2·cx × 2·cy).

use crate::detection3d::{project_box, Box3D};
use crate::kinematics::Trajectory;
use crate::scene_data::Frame;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("bad calibration: {0}")]
    BadCalibration(String),
}

/// A 3D box with an optional class label for color selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub box3d: Box3D,
    pub class: Option<String>,
}

/// Class colors for drawn boxes; unknown classes fall back to gray.
pub fn class_color(class: Option<&str>) -> &'static str {
    match class.map(|c| c.to_ascii_lowercase()).as_deref() {
        Some("car") => "#ff69b4",
        Some("truck") => "#2ecc40",
        Some("trailer") => "#ffdc00",
        Some("pedestrian") => "#0074d9",
        Some("traffic_cone") | Some("cone") => "#ffffff",
        _ => "#888888",
    }
}

const BEV_SIZE: f64 = 640.0;
const BEV_MARGIN: f64 = 40.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Bird's-eye-view plot of predicted vs ground-truth trajectories, with
/// optional object footprints. Ego x (forward) points up, ego y (leftward)
/// points left; grid ticks every 5 m.
pub fn render_bev(pred: &Trajectory, gt: &Trajectory, objects: &[SceneObject]) -> String {
    // Data extent over both trajectories and object centers, at least 10 m.
    let mut extent = 10.0f64;
    for p in pred.points.iter().chain(gt.points.iter()) {
        extent = extent.max(p.x.abs()).max(p.y.abs());
    }
    for o in objects {
        extent = extent.max(o.box3d.t[2].abs()).max(o.box3d.t[0].abs());
    }
    extent = (extent / 5.0).ceil() * 5.0 + 5.0;
    let scale = (BEV_SIZE / 2.0 - BEV_MARGIN) / extent;
    let mid = BEV_SIZE / 2.0;
    // Ego (x fwd, y left) to screen: forward up, leftward left.
    let sx = |ego_y: f64| mid - ego_y * scale;
    let sy = |ego_x: f64| mid - ego_x * scale;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {BEV_SIZE} {BEV_SIZE}\" width=\"{BEV_SIZE}\" height=\"{BEV_SIZE}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n");

    // Grid with 5 m ticks.
    svg.push_str("<g id=\"grid\" stroke=\"#dddddd\" stroke-width=\"1\">\n");
    let mut tick = -extent;
    while tick <= extent + 1e-9 {
        let along = mid - tick * scale;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"0\" x2=\"{}\" y2=\"{BEV_SIZE}\"/>\n",
            fmt(along),
            fmt(along)
        ));
        svg.push_str(&format!(
            "<line x1=\"0\" y1=\"{}\" x2=\"{BEV_SIZE}\" y2=\"{}\"/>\n",
            fmt(along),
            fmt(along)
        ));
        tick += 5.0;
    }
    svg.push_str("</g>\n");
    svg.push_str("<g id=\"tick-labels\" font-family=\"monospace\" font-size=\"10\" fill=\"#999999\">\n");
    let mut tick = -extent;
    while tick <= extent + 1e-9 {
        if tick.abs() > 1e-9 {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\">{}</text>\n",
                fmt(mid + 3.0),
                fmt(sy(tick) - 3.0),
                tick as i64
            ));
        }
        tick += 5.0;
    }
    svg.push_str("</g>\n");

    if !objects.is_empty() {
        // Camera-frame boxes drawn as ground footprints: ego forward = cam z,
        // ego leftward = −cam x. Corners 2,3,6,7 carry +y (ground side).
        svg.push_str("<g id=\"objects\" fill-opacity=\"0.35\" stroke-width=\"1.5\">\n");
        for o in objects {
            let color = class_color(o.class.as_deref());
            let pts = footprint(&o.box3d)
                .iter()
                .map(|&(ex, ey)| format!("{},{}", fmt(sx(ey)), fmt(sy(ex))))
                .collect::<Vec<_>>()
                .join(" ");
            svg.push_str(&format!(
                "<polygon points=\"{pts}\" fill=\"{color}\" stroke=\"{color}\"/>\n"
            ));
        }
        svg.push_str("</g>\n");
    }

    let polyline = |traj: &Trajectory| {
        traj.points
            .iter()
            .map(|p| format!("{},{}", fmt(sx(p.y)), fmt(sy(p.x))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    svg.push_str(&format!(
        "<polyline id=\"gt\" points=\"{}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n",
        polyline(gt)
    ));
    svg.push_str(&format!(
        "<polyline id=\"pred\" points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
        polyline(pred)
    ));

    // Ego marker and legend.
    svg.push_str(&format!(
        "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"#1f77b4\"/>\n",
        fmt(mid),
        fmt(mid)
    ));
    svg.push_str("<g id=\"legend\" font-family=\"monospace\" font-size=\"12\">\n");
    svg.push_str("<line x1=\"20\" y1=\"20\" x2=\"50\" y2=\"20\" stroke=\"#d62728\" stroke-width=\"2\"/>\n");
    svg.push_str("<text x=\"56\" y=\"24\">prediction</text>\n");
    svg.push_str("<line x1=\"20\" y1=\"38\" x2=\"50\" y2=\"38\" stroke=\"#555555\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n");
    svg.push_str("<text x=\"56\" y=\"42\">ground truth</text>\n");
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Ground-plane footprint of a camera-frame box in ego BEV coordinates
/// (forward, leftward), walked in perimeter order.
fn footprint(b: &Box3D) -> [(f64, f64); 4] {
    let (s, c) = b.yaw.sin_cos();
    let half_l = b.dims[0] / 2.0;
    let half_w = b.dims[1] / 2.0;
    // Object-frame (x, z) corners rotated by R_y and shifted by t.
    let corners = [
        (half_l, half_w),
        (half_l, -half_w),
        (-half_l, -half_w),
        (-half_l, half_w),
    ];
    corners.map(|(ox, oz)| {
        let cam_x = c * ox + s * oz + b.t[0];
        let cam_z = -s * ox + c * oz + b.t[2];
        (cam_z, -cam_x)
    })
}

/// Edges of the fixed corner ordering: pairs differing in exactly one bit.
const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (0, 2),
    (0, 4),
    (1, 3),
    (1, 5),
    (2, 3),
    (2, 6),
    (3, 7),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 7),
];

/// Overlay the predicted trajectory and 3D boxes on a camera frame.
///
/// Trajectory points are lifted to the ground plane (ego z = 0; the camera
/// height lives in `cam_from_ego`), transformed into the camera frame and
/// projected. Points behind the camera are clipped silently.
pub fn render_overlay(
    frame: &Frame,
    pred: &Trajectory,
    boxes: &[SceneObject],
) -> Result<String, RenderError> {
    let calib = &frame.camera;
    let q = calib.cam_from_ego.q_wxyz;
    let norm = calib.cam_from_ego.quaternion_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(RenderError::BadCalibration(format!(
            "quaternion norm {norm}"
        )));
    }
    if !(calib.fx > 0.0 && calib.fy > 0.0) {
        return Err(RenderError::BadCalibration("non-positive focal".into()));
    }
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    let t = Vector3::new(
        calib.cam_from_ego.t[0],
        calib.cam_from_ego.t[1],
        calib.cam_from_ego.t[2],
    );
    let intr = calib
        .intrinsics()
        .map_err(|e| RenderError::BadCalibration(e.to_string()))?;

    let width = 2.0 * calib.cx;
    let height = 2.0 * calib.cy;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n",
        fmt(width), fmt(height), fmt(width), fmt(height)
    ));
    svg.push_str(&format!(
        "<image href=\"{}\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\"/>\n",
        frame.image_path,
        fmt(width),
        fmt(height)
    ));

    // Trajectory on the ground plane; clip points behind the camera.
    let mut visible = Vec::new();
    for p in &pred.points {
        let ego = Vector3::new(p.x, p.y, 0.0);
        let cam = rot * ego + t;
        if cam.z > 1e-6 {
            let u = intr.fx * cam.x / cam.z + intr.cx;
            let v = intr.fy * cam.y / cam.z + intr.cy;
            visible.push(format!("{},{}", fmt(u), fmt(v)));
        }
    }
    if !visible.is_empty() {
        svg.push_str(&format!(
            "<polyline id=\"trajectory\" points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"4\" stroke-linecap=\"round\"/>\n",
            visible.join(" ")
        ));
    }

    for (i, obj) in boxes.iter().enumerate() {
        let Ok(proj) = project_box(&obj.box3d, &intr) else {
            continue; // fully or partly behind the camera: skip the box
        };
        let color = class_color(obj.class.as_deref());
        svg.push_str(&format!(
            "<g class=\"box\" id=\"box-{i}\" stroke=\"{color}\" stroke-width=\"2\">\n"
        ));
        for (a, b) in BOX_EDGES {
            let (x1, y1) = proj.corners[a];
            let (x2, y2) = proj.corners[b];
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n",
                fmt(x1),
                fmt(y1),
                fmt(x2),
                fmt(y2)
            ));
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
