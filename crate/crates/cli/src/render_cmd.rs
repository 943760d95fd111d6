//! The `render` subcommand: one BEV plot and one camera overlay per sample.

use crate::common::{load_scene_dir, read_predictions, write_file};
use crate::{CliError, CliResult};
use openemma_core::render::{render_bev, render_overlay};
use openemma_core::scene_data::{first_anchor_index, ground_truth_future, KEYFRAME_DT};
use std::path::Path;

pub fn execute(predictions: &Path, scenes_dir: &Path, out: &Path, horizon: u32) -> CliResult {
    let scenes = load_scene_dir(scenes_dir)?;
    let records = read_predictions(predictions)?;
    let mut rendered = 0;
    for record in &records {
        if record.failed {
            continue;
        }
        let scene = scenes
            .iter()
            .find(|s| s.manifest.scene_id == record.scene_id)
            .ok_or_else(|| {
                CliError::Data(format!(
                    "prediction references unknown scene_id {:?}",
                    record.scene_id
                ))
            })?;
        let anchor = first_anchor_index(&scene.manifest, horizon).ok_or_else(|| {
            CliError::Data(format!("scene {:?} has no valid anchor", record.scene_id))
        })?;
        let gt = ground_truth_future(&scene.manifest, anchor, horizon)
            .map_err(|e| CliError::Data(format!("scene {:?}: {e}", record.scene_id)))?;
        let pred = record.trajectory(KEYFRAME_DT);

        let stem = format!("{}_{:03}", record.scene_id, record.sample_index);
        write_file(
            &out.join(format!("{stem}_bev.svg")),
            &render_bev(&pred, &gt, &[]),
        )?;
        let overlay = render_overlay(&scene.manifest.frames[anchor], &pred, &[])
            .map_err(|e| CliError::Data(format!("scene {:?}: {e}", record.scene_id)))?;
        write_file(&out.join(format!("{stem}_overlay.svg")), &overlay)?;
        rendered += 1;
    }
    eprintln!("rendered {rendered} samples into {}", out.display());
    Ok(())
}
