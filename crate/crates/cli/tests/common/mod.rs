//! Shared helpers for the CLI integration tests.

use openemma_core::mllm_client::{bundle_fingerprint, ClientConfig};
use openemma_core::prompting::{build_prediction_prompt, build_reasoning_prompt, PromptBundle};
use openemma_core::response_parser::parse_reasoning;
use openemma_core::scene_data::{ego_history, first_anchor_index, load_manifest, SceneManifest};
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

pub fn fixtures_dir() -> PathBuf {
    workspace_root().join("fixtures")
}

pub fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_openemma"))
}

/// Fixture scenes sorted by scene_id, with their manifest paths.
pub fn fixture_scenes() -> Vec<(PathBuf, SceneManifest)> {
    let dir = fixtures_dir().join("scenes");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("fixtures/scenes")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let manifest = load_manifest(&p).expect("fixture manifest loads");
            (p, manifest)
        })
        .collect()
}

/// The client identity the fixture store was recorded under.
pub fn fixture_client_config() -> ClientConfig {
    ClientConfig {
        model: "gpt-4o".into(),
        temperature: 0.0,
        ..ClientConfig::default()
    }
}

/// Rebuild the exact stage-1 bundle the pipeline sends for a fixture scene
/// (default run settings: one attached frame, horizon 5).
pub fn stage1_bundle(manifest_path: &Path, manifest: &SceneManifest) -> PromptBundle {
    let anchor = first_anchor_index(manifest, 5).expect("fixture scene has an anchor");
    let history = ego_history(manifest, anchor).expect("fixture history");
    let dir = manifest_path.parent().expect("manifest dir");
    let image = dir.join(&manifest.frames[anchor].image_path);
    build_reasoning_prompt(&history, &[image]).expect("stage-1 bundle")
}

/// Rebuild the stage-2 bundle that follows a given stage-1 reply.
pub fn stage2_bundle(manifest: &SceneManifest, stage1_reply: &str) -> PromptBundle {
    let anchor = first_anchor_index(manifest, 5).expect("fixture scene has an anchor");
    let history = ego_history(manifest, anchor).expect("fixture history");
    let reasoning = parse_reasoning(stage1_reply).expect("fixture stage-1 reply parses");
    build_prediction_prompt(&reasoning, &history, 5)
}

pub fn fingerprint_of(bundle: &PromptBundle) -> String {
    bundle_fingerprint(bundle, &fixture_client_config()).expect("fingerprint")
}
