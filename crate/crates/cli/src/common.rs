//! Shared manifest/prediction/report I/O for the subcommands.

use crate::{CliError, CliResult};
use openemma_core::evaluation::{
    aggregate, report_csv, report_json, score_sample_with_mode, EvalReport, L2Mode,
    PredictionRecord, SceneScore,
};
use openemma_core::scene_data::{
    first_anchor_index, ground_truth_future, load_manifest, SceneManifest, KEYFRAME_DT,
};
use std::path::{Path, PathBuf};

/// A manifest plus the directory its image paths are relative to.
pub struct LoadedScene {
    pub manifest: SceneManifest,
    pub dir: PathBuf,
}

impl LoadedScene {
    pub fn image_path(&self, frame_index: usize) -> PathBuf {
        self.dir.join(&self.manifest.frames[frame_index].image_path)
    }
}

/// Load every `*.json` manifest in a directory, sorted by scene_id.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<LoadedScene>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read scenes dir {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "no *.json manifests in {}",
            dir.display()
        )));
    }
    let mut scenes = Vec::with_capacity(paths.len());
    for path in paths {
        let manifest = load_manifest(&path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        scenes.push(LoadedScene {
            manifest,
            dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        });
    }
    scenes.sort_by(|a, b| a.manifest.scene_id.cmp(&b.manifest.scene_id));
    Ok(scenes)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Serialize predictions one JSON object per line, already sorted.
pub fn predictions_to_jsonl(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

/// Score predictions against their scenes' ground truth. Failed predictions
/// keep their recorded cause; anchors are re-derived from the manifests.
pub fn score_predictions(
    records: &[PredictionRecord],
    scenes: &[LoadedScene],
    horizon: u32,
    mode: L2Mode,
) -> Result<Vec<SceneScore>, CliError> {
    let mut scores = Vec::with_capacity(records.len());
    for record in records {
        let scene = scenes
            .iter()
            .find(|s| s.manifest.scene_id == record.scene_id)
            .ok_or_else(|| {
                CliError::Data(format!("prediction references unknown scene_id {:?}", record.scene_id))
            })?;
        if record.failed {
            scores.push(SceneScore {
                scene_id: record.scene_id.clone(),
                sample_index: record.sample_index,
                l2_1s: None,
                l2_2s: None,
                l2_3s: None,
                failed: true,
                failure_cause: record.failure_cause,
            });
            continue;
        }
        let anchor = first_anchor_index(&scene.manifest, horizon).ok_or_else(|| {
            CliError::Data(format!(
                "scene {:?} has no anchor with full history and future",
                record.scene_id
            ))
        })?;
        let gt = ground_truth_future(&scene.manifest, anchor, horizon)
            .map_err(|e| CliError::Data(format!("scene {:?}: {e}", record.scene_id)))?;
        let pred = record.trajectory(KEYFRAME_DT);
        let score = score_sample_with_mode(&pred, &gt, mode)
            .map_err(|e| {
                CliError::Data(format!(
                    "scene {:?} sample {}: {e}",
                    record.scene_id, record.sample_index
                ))
            })?
            .with_ids(&record.scene_id, record.sample_index);
        scores.push(score);
    }
    Ok(scores)
}

pub fn build_report(
    scores: &[SceneScore],
    model: &str,
    n_skipped: usize,
) -> Result<EvalReport, CliError> {
    let mut report = aggregate(scores, model)
        .map_err(|e| CliError::Data(format!("cannot aggregate: {e}")))?;
    report.n_skipped = n_skipped;
    Ok(report)
}

pub fn write_report(out_dir: &Path, report: &EvalReport, mode: L2Mode) -> CliResult {
    write_file(&out_dir.join("report.json"), &report_json(report, mode))?;
    write_file(&out_dir.join("report.csv"), &report_csv(report))
}

pub fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
