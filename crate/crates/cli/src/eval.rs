//! The `eval` subcommand: predictions + manifests → report JSON/CSV.

use crate::common::{
    build_report, load_scene_dir, read_predictions, score_predictions, write_report,
};
use crate::{CliResult, ScoringArgs};
use std::path::Path;

pub fn execute(
    predictions: &Path,
    scenes_dir: &Path,
    out: &Path,
    model: &str,
    scoring: &ScoringArgs,
) -> CliResult {
    let scenes = load_scene_dir(scenes_dir)?;
    let records = read_predictions(predictions)?;
    let scores = score_predictions(&records, &scenes, scoring.horizon, scoring.l2_mode)?;

    // Manifests without a prediction were skipped by the run.
    let n_skipped = scenes
        .iter()
        .filter(|s| !records.iter().any(|r| r.scene_id == s.manifest.scene_id))
        .count();

    let report = build_report(&scores, model, n_skipped)?;
    write_report(out, &report, scoring.l2_mode)?;
    eprintln!(
        "scored {} samples over {} scenes ({} skipped)",
        records.len(),
        scenes.len(),
        n_skipped
    );
    Ok(())
}
