//! Two-stage chain-of-thought prompt construction.
//!
//! Stage 1 (reasoning) sends the camera frames plus the ego motion history
//! and asks for three headed sections: "Intent Command:", "Scene
//! Description:" and "Major Objects:". Stage 2 (prediction) embeds the
//! stage-1 output verbatim and asks for exactly 2·T future speed and
//! curvature samples as bracketed lists. The section headings and list
//! labels are this module's contract with the response parser.
//!
//! Templates live in versioned text assets under `assets/` with
//! `{{placeholder}}` substitution; every number is rendered with fixed
//! 2-decimal formatting so identical inputs yield byte-identical bundles.

use crate::scene_data::EgoHistory;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

const STAGE1_SYSTEM: &str = include_str!("../assets/stage1_system.txt");
const STAGE1_USER: &str = include_str!("../assets/stage1_user.txt");
const STAGE2_SYSTEM: &str = include_str!("../assets/stage2_system.txt");
const STAGE2_USER: &str = include_str!("../assets/stage2_user.txt");

/// Most camera frames attachable to a reasoning prompt (5 s at 2 Hz).
pub const MAX_IMAGES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("too many images: {0} (max {MAX_IMAGES})")]
    TooManyImages(usize),
    #[error("reasoning prompts need at least one image")]
    NoImages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Reasoning,
    Prediction,
}

/// Text plus image attachments for one chat call.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    /// (path, mime type), attached in order; newest frame last.
    pub images: Vec<(PathBuf, String)>,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntentManeuver {
    Straight,
    LeftTurn,
    RightTurn,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntentSpeed {
    Maintain,
    Accelerate,
    Decelerate,
    Stop,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalObject {
    pub label: String,
    pub location_text: String,
    pub rationale: String,
}

/// Structured stage-1 result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningOutput {
    pub intent: String,
    pub intent_maneuver: IntentManeuver,
    pub intent_speed: IntentSpeed,
    pub scene_description: String,
    pub critical_objects: Vec<CriticalObject>,
}

/// Bracketed list with fixed 2-decimal entries: `[2.00, 2.00]`.
fn format_list(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
    format!("[{}]", cells.join(", "))
}

fn render_template(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    debug_assert!(!out.contains("{{"), "unreplaced placeholder in template");
    out
}

fn mime_for(path: &Path) -> String {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
    .to_string()
}

fn history_vars(history: &EgoHistory) -> Vec<(&'static str, String)> {
    vec![
        ("speed_history", format_list(&history.speed)),
        ("curvature_history", format_list(&history.curvature)),
        ("current_speed", format!("{:.2}", history.current_speed)),
        (
            "current_curvature",
            format!("{:.2}", history.current_curvature),
        ),
        ("dt", format!("{:.2}", history.dt)),
    ]
}

/// Build the stage-1 reasoning bundle. `images` must already be ordered by
/// timestamp, oldest first (the newest frame ends up attached last).
pub fn build_reasoning_prompt(
    history: &EgoHistory,
    images: &[PathBuf],
) -> Result<PromptBundle, PromptError> {
    if images.is_empty() {
        return Err(PromptError::NoImages);
    }
    if images.len() > MAX_IMAGES {
        return Err(PromptError::TooManyImages(images.len()));
    }
    let mut vars = history_vars(history);
    vars.push(("frame_count", images.len().to_string()));
    Ok(PromptBundle {
        system_text: STAGE1_SYSTEM.to_string(),
        user_text: render_template(STAGE1_USER, &vars),
        images: images.iter().map(|p| (p.clone(), mime_for(p))).collect(),
        stage: Stage::Reasoning,
    })
}

/// Render the stage-1 sections the way the prediction prompt embeds them.
pub fn render_stage1_sections(reasoning: &ReasoningOutput) -> String {
    let mut out = String::new();
    out.push_str("Intent Command:\n");
    out.push_str(reasoning.intent.trim());
    out.push_str("\n\nScene Description:\n");
    out.push_str(reasoning.scene_description.trim());
    out.push_str("\n\nMajor Objects:\n");
    if reasoning.critical_objects.is_empty() {
        out.push_str("- none");
    } else {
        let lines: Vec<String> = reasoning
            .critical_objects
            .iter()
            .map(|o| format!("- {}, {}: {}", o.label, o.location_text, o.rationale))
            .collect();
        out.push_str(&lines.join("\n"));
    }
    out
}

/// Build the stage-2 prediction bundle: embeds the stage-1 sections,
/// restates the history and demands exactly `2·horizon_s` samples per list.
pub fn build_prediction_prompt(
    reasoning: &ReasoningOutput,
    history: &EgoHistory,
    horizon_s: u32,
) -> PromptBundle {
    let mut vars = history_vars(history);
    vars.push(("stage1_sections", render_stage1_sections(reasoning)));
    vars.push(("horizon_seconds", horizon_s.to_string()));
    vars.push(("horizon_points", (2 * horizon_s).to_string()));
    PromptBundle {
        system_text: STAGE2_SYSTEM.to_string(),
        user_text: render_template(STAGE2_USER, &vars),
        images: Vec::new(),
        stage: Stage::Prediction,
    }
}
