//! Client for OpenAI-compatible vision chat endpoints, with record and
//! replay backends so the full pipeline runs offline and deterministically.
//!
//! Wire format: `POST {base_url}/chat/completions` with the standard chat
//! schema; images ride along as base64 data URIs in `image_url` content
//! parts. Requests are fingerprinted by a SHA-256 over (model, temperature,
//! ordered text parts, image content hashes) — image *bytes*, not paths, so
//! recorded fixtures relocate freely. The replay store is JSONL with one
//! `{"key": hex, "text": str}` entry per line.
//!
//! Transport errors and HTTP 429/5xx retry with exponential backoff (base
//! 1 s, factor 2, full jitter) up to `max_retries`; other 4xx fail fast.

use crate::prompting::PromptBundle;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Largest accepted image attachment.
pub const MAX_IMAGE_BYTES: u64 = 20 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure after {retries} retries: {cause}")]
    Transport { cause: String, retries: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("empty completion")]
    EmptyCompletion,
    #[error("cannot read image {path}: {cause}")]
    ImageUnreadable { path: PathBuf, cause: String },
    #[error("image {path} is {bytes} bytes (max {MAX_IMAGE_BYTES})")]
    ImageTooLarge { path: PathBuf, bytes: u64 },
    #[error("replay miss for fingerprint {key}")]
    ReplayMiss { key: String },
    #[error("corrupt store line {line}: {msg}")]
    StoreCorrupt { line: usize, msg: String },
    #[error("invalid client config: {0}")]
    InvalidConfig(String),
    #[error("store I/O: {0}")]
    StoreIo(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles per retry with full jitter.
    pub backoff_base_s: f64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: "gpt-4o".into(),
            api_key: String::new(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_s: 120.0,
            max_retries: 3,
            backoff_base_s: 1.0,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if !(self.timeout_s > 0.0) {
            return Err(ClientError::InvalidConfig("timeout must be > 0".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ClientError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    /// Retries spent on this call (0 when the first attempt succeeded).
    pub retries: u32,
}

// --- wire types ---

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
#[serde(untagged)]
enum WireContent {
    Text(String),
    Parts(Vec<WirePart>),
}

#[derive(Serialize)]
struct WireMessage {
    role: &'static str,
    content: WireContent,
}

#[derive(Serialize)]
#[serde(tag = "type")]
enum WirePart {
    #[serde(rename = "text")]
    Text { text: String },
    #[serde(rename = "image_url")]
    ImageUrl { image_url: WireImageUrl },
}

#[derive(Serialize)]
struct WireImageUrl {
    url: String,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

// --- fingerprinting ---

/// SHA-256 request fingerprint over (model, temperature, ordered text
/// parts, image content hashes), length-prefixed so adjacent fields can
/// never alias.
pub fn fingerprint(
    model: &str,
    temperature: f64,
    texts: &[&str],
    image_hashes: &[[u8; 32]],
) -> String {
    let mut h = Sha256::new();
    h.update((model.len() as u64).to_le_bytes());
    h.update(model.as_bytes());
    h.update(temperature.to_le_bytes());
    for t in texts {
        h.update([1u8]);
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    for img in image_hashes {
        h.update([2u8]);
        h.update(img);
    }
    hex::encode(h.finalize())
}

fn sha256_bytes(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// Read a bundle's attachments and compute its request fingerprint.
pub fn bundle_fingerprint(bundle: &PromptBundle, cfg: &ClientConfig) -> Result<String, ClientError> {
    let images = load_images(bundle)?;
    let hashes: Vec<[u8; 32]> = images.iter().map(|(bytes, _)| sha256_bytes(bytes)).collect();
    Ok(fingerprint(
        &cfg.model,
        cfg.temperature,
        &[&bundle.system_text, &bundle.user_text],
        &hashes,
    ))
}

fn load_images(bundle: &PromptBundle) -> Result<Vec<(Vec<u8>, String)>, ClientError> {
    bundle
        .images
        .iter()
        .map(|(path, mime)| {
            let meta = std::fs::metadata(path).map_err(|e| ClientError::ImageUnreadable {
                path: path.clone(),
                cause: e.to_string(),
            })?;
            if meta.len() > MAX_IMAGE_BYTES {
                return Err(ClientError::ImageTooLarge {
                    path: path.clone(),
                    bytes: meta.len(),
                });
            }
            let bytes = std::fs::read(path).map_err(|e| ClientError::ImageUnreadable {
                path: path.clone(),
                cause: e.to_string(),
            })?;
            Ok((bytes, mime.clone()))
        })
        .collect()
}

// --- replay store ---

#[derive(Serialize, Deserialize)]
struct StoreLine {
    key: String,
    text: String,
}

/// Immutable fingerprint → response map loaded from a JSONL file.
/// Duplicate keys resolve to the last line (natural for re-recording).
#[derive(Debug, Default)]
pub struct ReplayStore {
    entries: HashMap<String, String>,
}

impl ReplayStore {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClientError::StoreIo(format!(
            "{}: {e}",
            path.display()
        )))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ClientError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: StoreLine =
                serde_json::from_str(line).map_err(|e| ClientError::StoreCorrupt {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            entries.insert(parsed.key, parsed.text);
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Append-only record sink; one writer serializes concurrent appends.
#[derive(Debug)]
pub struct RecordWriter {
    file: Mutex<std::fs::File>,
}

impl RecordWriter {
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| ClientError::StoreIo(e.to_string()))?;
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ClientError::StoreIo(format!("{}: {e}", path.display())))?;
        Ok(Self {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, key: &str, text: &str) -> Result<(), ClientError> {
        let line = serde_json::to_string(&StoreLine {
            key: key.to_string(),
            text: text.to_string(),
        })
        .expect("store line serializes");
        let mut file = self.file.lock().expect("record writer lock");
        writeln!(file, "{line}").map_err(|e| ClientError::StoreIo(e.to_string()))?;
        file.flush().map_err(|e| ClientError::StoreIo(e.to_string()))
    }
}

enum Backend {
    Live(reqwest::blocking::Client),
    Replay(ReplayStore),
}

/// Chat client; safe for concurrent `complete` calls.
pub struct Client {
    cfg: ClientConfig,
    backend: Backend,
    recorder: Option<RecordWriter>,
}

impl Client {
    /// A live HTTP client against `cfg.base_url`.
    pub fn live(cfg: ClientConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        if cfg.base_url.is_empty() {
            return Err(ClientError::InvalidConfig("base_url is required".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| ClientError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            cfg,
            backend: Backend::Live(http),
            recorder: None,
        })
    }

    /// A replay client answering only from a recorded store.
    pub fn replay(cfg: ClientConfig, store_path: &Path) -> Result<Self, ClientError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            backend: Backend::Replay(ReplayStore::load(store_path)?),
            recorder: None,
        })
    }

    /// Tee every (fingerprint, response) pair into a record store.
    pub fn with_record(mut self, path: &Path) -> Result<Self, ClientError> {
        self.recorder = Some(RecordWriter::open(path)?);
        Ok(self)
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    /// Send one chat completion for the bundle.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<ChatResponse, ClientError> {
        let images = load_images(bundle)?;
        let hashes: Vec<[u8; 32]> = images.iter().map(|(b, _)| sha256_bytes(b)).collect();
        let key = fingerprint(
            &self.cfg.model,
            self.cfg.temperature,
            &[&bundle.system_text, &bundle.user_text],
            &hashes,
        );

        let response = match &self.backend {
            Backend::Replay(store) => {
                let text = store
                    .get(&key)
                    .ok_or_else(|| ClientError::ReplayMiss { key: key.clone() })?;
                ChatResponse {
                    text: text.to_string(),
                    prompt_tokens: 0,
                    completion_tokens: 0,
                    latency_ms: 0,
                    retries: 0,
                }
            }
            Backend::Live(http) => self.complete_live(http, bundle, &images)?,
        };

        if let Some(recorder) = &self.recorder {
            recorder.append(&key, &response.text)?;
        }
        Ok(response)
    }

    fn complete_live(
        &self,
        http: &reqwest::blocking::Client,
        bundle: &PromptBundle,
        images: &[(Vec<u8>, String)],
    ) -> Result<ChatResponse, ClientError> {
        let mut parts = vec![WirePart::Text {
            text: bundle.user_text.clone(),
        }];
        for (bytes, mime) in images {
            let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
            parts.push(WirePart::ImageUrl {
                image_url: WireImageUrl {
                    url: format!("data:{mime};base64,{b64}"),
                },
            });
        }
        let body = WireRequest {
            model: &self.cfg.model,
            messages: vec![
                WireMessage {
                    role: "system",
                    content: WireContent::Text(bundle.system_text.clone()),
                },
                WireMessage {
                    role: "user",
                    content: WireContent::Parts(parts),
                },
            ],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        };
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));

        let started = Instant::now();
        let mut retries = 0;
        loop {
            // The payload is rebuilt identically on every attempt; retries
            // never mutate the request.
            let mut req = http.post(&url).json(&body);
            if !self.cfg.api_key.is_empty() {
                req = req.bearer_auth(&self.cfg.api_key);
            }
            let outcome: Result<(), String> = match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: WireResponse = resp.json().map_err(|e| {
                            ClientError::Transport {
                                cause: format!("malformed response body: {e}"),
                                retries,
                            }
                        })?;
                        let usage = parsed.usage.unwrap_or_default();
                        let text = parsed
                            .choices
                            .into_iter()
                            .next()
                            .and_then(|c| c.message.content)
                            .unwrap_or_default();
                        if text.trim().is_empty() {
                            return Err(ClientError::EmptyCompletion);
                        }
                        return Ok(ChatResponse {
                            text,
                            prompt_tokens: usage.prompt_tokens,
                            completion_tokens: usage.completion_tokens,
                            latency_ms: started.elapsed().as_millis() as u64,
                            retries,
                        });
                    }
                    let code = status.as_u16();
                    let body_snippet: String = resp
                        .text()
                        .unwrap_or_default()
                        .chars()
                        .take(200)
                        .collect();
                    if code == 429 || code >= 500 {
                        Err(format!("HTTP {code}: {body_snippet}"))
                    } else {
                        return Err(ClientError::Http {
                            status: code,
                            body: body_snippet,
                        });
                    }
                }
                Err(e) => Err(e.to_string()),
            };

            let cause = outcome.expect_err("success returns above");
            if retries >= self.cfg.max_retries {
                return Err(ClientError::Transport { cause, retries });
            }
            let cap = self.cfg.backoff_base_s * f64::powi(2.0, retries as i32);
            let sleep_s = rand::rng().random_range(0.0..cap.max(f64::MIN_POSITIVE));
            std::thread::sleep(Duration::from_secs_f64(sleep_s));
            retries += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::Stage;

    fn bundle_with(user: &str, images: Vec<(PathBuf, String)>) -> PromptBundle {
        PromptBundle {
            system_text: "sys".into(),
            user_text: user.into(),
            images,
            stage: Stage::Prediction,
        }
    }

    #[test]
    fn fingerprint_separates_fields() {
        // Length prefixes keep ("ab", "c") distinct from ("a", "bc").
        let a = fingerprint("m", 0.0, &["ab", "c"], &[]);
        let b = fingerprint("m", 0.0, &["a", "bc"], &[]);
        assert_ne!(a, b);
        let c = fingerprint("m", 0.5, &["ab", "c"], &[]);
        assert_ne!(a, c);
        assert_eq!(a, fingerprint("m", 0.0, &["ab", "c"], &[]));
    }

    #[test]
    fn fingerprint_tracks_image_content() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.png");
        std::fs::write(&img, [1u8, 2, 3, 4]).unwrap();
        let cfg = ClientConfig::default();
        let b = bundle_with("hi", vec![(img.clone(), "image/png".into())]);
        let key1 = bundle_fingerprint(&b, &cfg).unwrap();
        // One changed byte in the image changes the fingerprint.
        std::fs::write(&img, [1u8, 2, 3, 5]).unwrap();
        let key2 = bundle_fingerprint(&b, &cfg).unwrap();
        assert_ne!(key1, key2);
    }

    #[test]
    fn replay_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store.jsonl");
        let cfg = ClientConfig::default();
        let b = bundle_with("predict please", vec![]);
        let key = bundle_fingerprint(&b, &cfg).unwrap();

        let writer = RecordWriter::open(&store).unwrap();
        writer.append(&key, "Speed: [1]\nCurvature: [0]").unwrap();
        drop(writer);

        let client = Client::replay(cfg, &store).unwrap();
        let resp = client.complete(&b).unwrap();
        assert_eq!(resp.text, "Speed: [1]\nCurvature: [0]");
        assert_eq!(resp.retries, 0);
    }

    #[test]
    fn replay_miss_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store.jsonl");
        std::fs::write(&store, "").unwrap();
        let client = Client::replay(ClientConfig::default(), &store).unwrap();
        let err = client.complete(&bundle_with("unseen", vec![])).unwrap_err();
        assert!(matches!(err, ClientError::ReplayMiss { .. }));
    }

    #[test]
    fn truncated_store_line_reports_line_number() {
        let err = ReplayStore::parse("{\"key\": \"aa\", \"text\": \"ok\"}\n{\"key\": \"bb\", \"tex").unwrap_err();
        match err {
            ClientError::StoreCorrupt { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_store_keys_take_the_last_line() {
        let store = ReplayStore::parse(
            "{\"key\": \"k\", \"text\": \"old\"}\n{\"key\": \"k\", \"text\": \"new\"}\n",
        )
        .unwrap();
        assert_eq!(store.get("k"), Some("new"));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn missing_image_is_unreadable() {
        let cfg = ClientConfig::default();
        let b = bundle_with(
            "hi",
            vec![(PathBuf::from("/nonexistent/img.png"), "image/png".into())],
        );
        assert!(matches!(
            bundle_fingerprint(&b, &cfg),
            Err(ClientError::ImageUnreadable { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ClientConfig::default();
        cfg.temperature = 2.5;
        assert!(cfg.validate().is_err());
        cfg.temperature = 0.0;
        cfg.timeout_s = 0.0;
        assert!(cfg.validate().is_err());
    }
}
