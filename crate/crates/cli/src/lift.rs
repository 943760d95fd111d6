//! The `lift` subcommand: detections JSONL + intrinsics → 3D boxes JSONL.

use crate::common::write_file;
use crate::{CliError, CliResult};
use openemma_core::detection3d::{lift_box, parse_detections, CameraIntrinsics, LiftedBoxRecord};
use std::path::Path;

pub fn execute(detections: &Path, intrinsics: &Path, out: &Path) -> CliResult {
    let intr_text = std::fs::read_to_string(intrinsics)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", intrinsics.display())))?;
    let intr: CameraIntrinsics = serde_json::from_str(&intr_text)
        .map_err(|e| CliError::Data(format!("{}: {e}", intrinsics.display())))?;
    CameraIntrinsics::new(intr.fx, intr.fy, intr.cx, intr.cy)
        .map_err(|e| CliError::Data(format!("{}: {e}", intrinsics.display())))?;

    let det_text = std::fs::read_to_string(detections)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", detections.display())))?;
    let records = parse_detections(&det_text)
        .map_err(|e| CliError::Data(format!("{}: {e}", detections.display())))?;

    let mut lines = String::new();
    let mut lifted_count = 0;
    for (i, record) in records.iter().enumerate() {
        let det = record
            .detection()
            .map_err(|e| CliError::Data(format!("detection {}: {e}", i + 1)))?;
        match lift_box(&det, &intr) {
            Ok((box3d, err)) => {
                let out_record = LiftedBoxRecord {
                    frame: record.frame,
                    class: record.class.clone(),
                    t: box3d.t,
                    dims_lwh: box3d.dims,
                    yaw: box3d.yaw,
                    reproj_err_px: err,
                };
                lines.push_str(&serde_json::to_string(&out_record).expect("record serializes"));
                lines.push('\n');
                lifted_count += 1;
            }
            Err(e) => eprintln!("detection {} (frame {}): {e}", i + 1, record.frame),
        }
    }
    write_file(out, &lines)?;
    eprintln!("lifted {lifted_count}/{} detections", records.len());
    Ok(())
}
