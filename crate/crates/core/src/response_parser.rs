//! Turns free-form model text into structured values.
//!
//! Stage-1 replies are split on the three required section headers
//! (case-insensitive, tolerating markdown decorations like `### Intent
//! Command` or `**Intent Command:**`). Stage-2 replies are scanned for a
//! bracketed numeric list after a label matching /speed/i and another after
//! /curvature/i; code fences are stripped first, so fenced lists parse the
//! same as bare ones. When a reply contains several candidate lists (models
//! like to echo the history), the last one wins.
//!
//! Sanitization: speeds clamp to [0, 40] m/s, curvatures to [−0.5, 0.5] 1/m;
//! lists longer than requested are truncated from the end (flagged), shorter
//! ones are rejected.

use crate::prompting::{CriticalObject, IntentManeuver, IntentSpeed, ReasoningOutput};
use regex::{Regex, RegexBuilder};
use std::sync::OnceLock;
use thiserror::Error;

pub const SPEED_RANGE: (f64, f64) = (0.0, 40.0);
pub const CURVATURE_RANGE: (f64, f64) = (-0.5, 0.5);

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("missing section {0:?}")]
    MissingSection(&'static str),
    #[error("no bracketed numeric list after a {0:?} label")]
    MissingList(&'static str),
    #[error("{which} list has {found} points, need {needed}")]
    TooFewPoints {
        which: &'static str,
        found: usize,
        needed: usize,
    },
    #[error("non-numeric token {0:?}")]
    NonNumericToken(String),
}

/// Parsed stage-2 prediction: exactly `horizon_points` samples per list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPrediction {
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
    pub raw_text: String,
    /// True when an over-long list was truncated to the requested length.
    pub truncated: bool,
}

struct SectionPattern {
    name: &'static str,
    regex: Regex,
}

fn section_patterns() -> &'static [SectionPattern; 3] {
    static PATTERNS: OnceLock<[SectionPattern; 3]> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        let build = |name: &'static str, words: &str| SectionPattern {
            name,
            regex: RegexBuilder::new(&format!(
                r"(?:^|\n)[ \t>]*(?:#{{1,6}}[ \t]*)?\**[ \t]*{words}[ \t]*\**[ \t]*:?\**"
            ))
            .case_insensitive(true)
            .build()
            .expect("section regex compiles"),
        };
        [
            build("Intent Command", r"intent[ \t]+command"),
            build("Scene Description", r"scene[ \t]+description"),
            build("Major Objects", r"major[ \t]+objects"),
        ]
    })
}

/// Parse a stage-1 reasoning reply into its three sections.
pub fn parse_reasoning(text: &str) -> Result<ReasoningOutput, ParseError> {
    let text = strip_code_fences(text);
    // Locate each header once; sections run to the next header or the end.
    let mut found: Vec<(usize, usize, usize)> = Vec::new(); // (pattern idx, start, end)
    for (i, pat) in section_patterns().iter().enumerate() {
        match pat.regex.find(&text) {
            Some(m) => found.push((i, m.start(), m.end())),
            None => return Err(ParseError::MissingSection(pat.name)),
        }
    }
    found.sort_by_key(|&(_, start, _)| start);
    let mut sections = [""; 3];
    for (pos, &(idx, _, end)) in found.iter().enumerate() {
        let until = found.get(pos + 1).map_or(text.len(), |&(_, s, _)| s);
        sections[idx] = text[end..until].trim();
    }
    let [intent, scene, objects] = sections;
    for (content, pat) in sections.iter().zip(section_patterns()) {
        if content.is_empty() {
            return Err(ParseError::MissingSection(pat.name));
        }
    }

    Ok(ReasoningOutput {
        intent: intent.to_string(),
        intent_maneuver: scan_maneuver(intent),
        intent_speed: scan_speed(intent),
        scene_description: scene.to_string(),
        critical_objects: parse_object_list(objects),
    })
}

/// Earliest keyword in the intent text wins.
fn scan_maneuver(intent: &str) -> IntentManeuver {
    let lower = intent.to_lowercase();
    let candidates = [
        ("left", IntentManeuver::LeftTurn),
        ("right", IntentManeuver::RightTurn),
        ("straight", IntentManeuver::Straight),
    ];
    candidates
        .iter()
        .filter_map(|(kw, m)| lower.find(kw).map(|pos| (pos, *m)))
        .min_by_key(|&(pos, _)| pos)
        .map_or(IntentManeuver::Unknown, |(_, m)| m)
}

fn scan_speed(intent: &str) -> IntentSpeed {
    let lower = intent.to_lowercase();
    let candidates = [
        ("accelerate", IntentSpeed::Accelerate),
        ("decelerate", IntentSpeed::Decelerate),
        ("slow", IntentSpeed::Decelerate),
        ("stop", IntentSpeed::Stop),
        ("maintain", IntentSpeed::Maintain),
    ];
    candidates
        .iter()
        .filter_map(|(kw, m)| lower.find(kw).map(|pos| (pos, *m)))
        .min_by_key(|&(pos, _)| pos)
        .map_or(IntentSpeed::Unknown, |(_, m)| m)
}

/// Parse `- label, location: rationale` list items.
fn parse_object_list(section: &str) -> Vec<CriticalObject> {
    static ITEM: OnceLock<Regex> = OnceLock::new();
    let item = ITEM.get_or_init(|| {
        Regex::new(r"(?m)^[ \t]*(?:[-*•]|\d+[.)])[ \t]+(.+)$").expect("item regex compiles")
    });
    item.captures_iter(section)
        .map(|c| {
            let body = c[1].trim();
            let (head, rationale) = match body.split_once(':') {
                Some((h, r)) => (h.trim(), r.trim()),
                None => (body, ""),
            };
            let (label, location) = match head.split_once(',') {
                Some((l, loc)) => (l.trim(), loc.trim()),
                None => (head, ""),
            };
            CriticalObject {
                label: label.to_string(),
                location_text: location.to_string(),
                rationale: rationale.to_string(),
            }
        })
        .collect()
}

fn strip_code_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Find the bracketed lists following a label regex; the last match wins.
fn find_list(text: &str, label: &Regex) -> Option<String> {
    let mut last = None;
    for m in label.find_iter(text) {
        let tail = &text[m.end()..];
        // A list body must open within a short window after the label.
        let window = &tail[..tail.len().min(200)];
        let Some(open_rel) = window.find('[') else {
            continue;
        };
        let after_open = &tail[open_rel + 1..];
        let Some(close_rel) = after_open.find(']') else {
            continue;
        };
        last = Some(after_open[..close_rel].to_string());
    }
    last
}

fn parse_numeric_list(
    body: &str,
    which: &'static str,
    needed: usize,
) -> Result<(Vec<f64>, bool), ParseError> {
    let mut values = Vec::new();
    for token in body.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        // Tolerate unicode minus signs, which some models emit.
        let cleaned = token.replace('\u{2212}', "-");
        match cleaned.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(ParseError::NonNumericToken(token.to_string())),
        }
    }
    if values.len() < needed {
        return Err(ParseError::TooFewPoints {
            which,
            found: values.len(),
            needed,
        });
    }
    let truncated = values.len() > needed;
    values.truncate(needed);
    Ok((values, truncated))
}

fn clamp_all(values: &mut [f64], range: (f64, f64)) {
    for v in values {
        *v = v.clamp(range.0, range.1);
    }
}

/// Parse a stage-2 prediction reply into speed and curvature vectors.
pub fn parse_prediction(text: &str, horizon_points: usize) -> Result<ParsedPrediction, ParseError> {
    static SPEED: OnceLock<Regex> = OnceLock::new();
    static CURV: OnceLock<Regex> = OnceLock::new();
    let speed_label = SPEED.get_or_init(|| {
        RegexBuilder::new(r"speed")
            .case_insensitive(true)
            .build()
            .expect("label regex compiles")
    });
    let curv_label = CURV.get_or_init(|| {
        RegexBuilder::new(r"curvature")
            .case_insensitive(true)
            .build()
            .expect("label regex compiles")
    });

    let stripped = strip_code_fences(text);
    let speed_body = find_list(&stripped, speed_label).ok_or(ParseError::MissingList("speed"))?;
    let curv_body =
        find_list(&stripped, curv_label).ok_or(ParseError::MissingList("curvature"))?;

    let (mut speed, t1) = parse_numeric_list(&speed_body, "speed", horizon_points)?;
    let (mut curvature, t2) = parse_numeric_list(&curv_body, "curvature", horizon_points)?;
    clamp_all(&mut speed, SPEED_RANGE);
    clamp_all(&mut curvature, CURVATURE_RANGE);

    Ok(ParsedPrediction {
        speed,
        curvature,
        raw_text: text.to_string(),
        truncated: t1 || t2,
    })
}

/// Canonical formatter; `parse_prediction(format_prediction(s, c), n)`
/// recovers `s` and `c` exactly for in-range values.
pub fn format_prediction(speed: &[f64], curvature: &[f64]) -> String {
    let list = |values: &[f64]| {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "Speed: [{}]\nCurvature: [{}]\n",
        list(speed),
        list(curvature)
    )
}
