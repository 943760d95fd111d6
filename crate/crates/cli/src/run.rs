//! The `run` subcommand: stage-1 reasoning, stage-2 prediction, kinematic
//! integration, scoring.
//!
//! One prediction sample per scene, anchored at the first frame with both
//! full history (10 past keyframes) and full future (2·horizon keyframes).
//! Scenes lacking either are counted as skipped. A scene whose model reply
//! cannot be used (client error or parse error) becomes a failed sample
//! with cause ParseError; it never aborts the run.
//!
//! Scene-level parallelism uses a bounded worker pool; results are sorted
//! by (scene_id, sample_index) before writing, so the worker count never
//! changes the output bytes.

use crate::common::{
    build_report, load_scene_dir, predictions_to_jsonl, score_predictions, write_file,
    write_report, LoadedScene,
};
use crate::{CliError, CliResult, ScoringArgs};
use openemma_core::evaluation::{FailureCause, PredictionRecord};
use openemma_core::kinematics::{integrate_trajectory, ControlProfile, Point2};
use openemma_core::mllm_client::{Client, ClientConfig};
use openemma_core::prompting::{build_prediction_prompt, build_reasoning_prompt};
use openemma_core::response_parser::{parse_prediction, parse_reasoning};
use openemma_core::scene_data::{first_anchor_index, ego_history, KEYFRAME_DT};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub struct RunOptions {
    pub scenes: PathBuf,
    pub out: PathBuf,
    pub model: String,
    pub base_url: Option<String>,
    pub frames: usize,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub workers: usize,
    pub scoring: ScoringArgs,
}

enum SceneOutcome {
    Skipped,
    Sample(PredictionRecord),
}

pub fn execute(opts: RunOptions) -> CliResult {
    if !(1..=10).contains(&opts.frames) {
        return Err(CliError::Usage(format!(
            "--frames must be 1..=10, got {}",
            opts.frames
        )));
    }
    if opts.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }

    let cfg = client_config(&opts)?;
    let client = match &opts.replay {
        Some(store) => Client::replay(cfg, store)
            .map_err(|e| CliError::Data(format!("replay store: {e}")))?,
        None => Client::live(cfg).map_err(|e| {
            CliError::Usage(format!(
                "{e} (pass --base-url or set OPENEMMA_BASE_URL, or use --replay)"
            ))
        })?,
    };
    let client = match &opts.record {
        Some(path) => client
            .with_record(path)
            .map_err(|e| CliError::Data(format!("record store: {e}")))?,
        None => client,
    };

    let scenes = load_scene_dir(&opts.scenes)?;
    let outcomes = process_scenes(&scenes, &client, &opts);

    let mut n_skipped = 0;
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome {
            SceneOutcome::Skipped => n_skipped += 1,
            SceneOutcome::Sample(record) => records.push(record),
        }
    }
    records.sort_by(|a, b| {
        (&a.scene_id, a.sample_index).cmp(&(&b.scene_id, b.sample_index))
    });

    if records.is_empty() {
        return Err(CliError::Data(format!(
            "all {n_skipped} scenes were skipped (insufficient history/future)"
        )));
    }

    write_file(&opts.out.join("predictions.jsonl"), &predictions_to_jsonl(&records))?;
    let scores = score_predictions(&records, &scenes, opts.scoring.horizon, opts.scoring.l2_mode)?;
    let report = build_report(&scores, &opts.model, n_skipped)?;
    write_report(&opts.out, &report, opts.scoring.l2_mode)?;

    let failed = scores.iter().filter(|s| s.failed).count();
    eprintln!(
        "ran {} scenes: {} samples ({} failed), {} skipped",
        scenes.len(),
        records.len(),
        failed,
        n_skipped
    );
    Ok(())
}

fn client_config(opts: &RunOptions) -> Result<ClientConfig, CliError> {
    let env_base = std::env::var("OPENEMMA_BASE_URL").ok();
    let env_key = std::env::var("OPENEMMA_API_KEY").ok();
    Ok(ClientConfig {
        base_url: opts.base_url.clone().or(env_base).unwrap_or_default(),
        model: opts.model.clone(),
        api_key: env_key.unwrap_or_default(),
        ..ClientConfig::default()
    })
}

/// Bounded worker pool over scene indices; outcome order mirrors input
/// order (re-sorted later anyway).
fn process_scenes(scenes: &[LoadedScene], client: &Client, opts: &RunOptions) -> Vec<SceneOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<SceneOutcome>>> =
        scenes.iter().map(|_| Mutex::new(None)).collect();
    let workers = opts.workers.min(scenes.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= scenes.len() {
                    break;
                }
                let outcome = process_scene(&scenes[i], client, opts);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("worker filled slot"))
        .collect()
}

fn process_scene(scene: &LoadedScene, client: &Client, opts: &RunOptions) -> SceneOutcome {
    let manifest = &scene.manifest;
    let Some(anchor) = first_anchor_index(manifest, opts.scoring.horizon) else {
        return SceneOutcome::Skipped;
    };
    let history = match ego_history(manifest, anchor) {
        Ok(h) => h,
        Err(_) => return SceneOutcome::Skipped,
    };

    let first_image = anchor + 1 - opts.frames.min(anchor + 1);
    let images: Vec<PathBuf> = (first_image..=anchor).map(|i| scene.image_path(i)).collect();

    let failure = |cause: &str| {
        eprintln!("scene {}: {cause}", manifest.scene_id);
        SceneOutcome::Sample(PredictionRecord {
            scene_id: manifest.scene_id.clone(),
            sample_index: 0,
            points: Vec::new(),
            failed: true,
            failure_cause: FailureCause::ParseError,
        })
    };

    let stage1 = match build_reasoning_prompt(&history, &images) {
        Ok(b) => b,
        Err(e) => return failure(&format!("stage-1 prompt: {e}")),
    };
    let reply1 = match client.complete(&stage1) {
        Ok(r) => r,
        Err(e) => return failure(&format!("stage-1 request: {e}")),
    };
    let reasoning = match parse_reasoning(&reply1.text) {
        Ok(r) => r,
        Err(e) => return failure(&format!("stage-1 parse: {e}")),
    };

    let stage2 = build_prediction_prompt(&reasoning, &history, opts.scoring.horizon);
    let reply2 = match client.complete(&stage2) {
        Ok(r) => r,
        Err(e) => return failure(&format!("stage-2 request: {e}")),
    };
    let horizon_points = 2 * opts.scoring.horizon as usize;
    let parsed = match parse_prediction(&reply2.text, horizon_points) {
        Ok(p) => p,
        Err(e) => return failure(&format!("stage-2 parse: {e}")),
    };

    // Prepend the anchor's own speed/curvature so point 0 is the origin at
    // the current state, then integrate in the ego frame.
    let mut speed = Vec::with_capacity(horizon_points + 1);
    speed.push(history.current_speed);
    speed.extend_from_slice(&parsed.speed);
    let mut curvature = Vec::with_capacity(horizon_points + 1);
    curvature.push(history.current_curvature);
    curvature.extend_from_slice(&parsed.curvature);

    let profile = match ControlProfile::new(KEYFRAME_DT, speed, curvature) {
        Ok(p) => p,
        Err(e) => return failure(&format!("control profile: {e}")),
    };
    let trajectory = match integrate_trajectory(&profile, 0.0, Point2::new(0.0, 0.0)) {
        Ok(t) => t,
        Err(e) => return failure(&format!("integration: {e}")),
    };

    SceneOutcome::Sample(PredictionRecord {
        scene_id: manifest.scene_id.clone(),
        sample_index: 0,
        points: trajectory.points.iter().map(|p| [p.x, p.y]).collect(),
        failed: false,
        failure_cause: FailureCause::None,
    })
}
