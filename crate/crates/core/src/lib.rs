//! Toolkit for end-to-end driving with vision-language models.
//!
//! The pipeline prompts a multimodal chat model in two stages (scene
//! reasoning, then numeric prediction), parses the free-text reply into
//! per-timestep speed and curvature, integrates those into an ego-frame
//! trajectory, and scores the result against ground truth with the
//! open-loop L2 / failure-rate protocol. A separate geometry module lifts
//! 2D detections into 7-parameter 3D boxes via the tight-enclosure
//! constraint, and a render module emits SVG figures.

pub mod detection3d;
pub mod evaluation;
pub mod kinematics;
pub mod mllm_client;
pub mod prompting;
pub mod render;
pub mod response_parser;
pub mod scene_data;
