//! Optional metadata inference through a chat-completion endpoint.
//!
//! Suggestions are advisory: nothing here writes to a locator. Use
//! [`apply_suggestion`] to turn a confirmed suggestion into a validated row.

mod transport;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::locator::LocatorRow;

pub use transport::{ChatTransport, HttpTransport, MockTransport};

pub const ENV_BASE_URL: &str = "EEGUNIFY_LLM_BASE_URL";
pub const ENV_MODEL: &str = "EEGUNIFY_LLM_MODEL";
pub const ENV_API_KEY: &str = "EEGUNIFY_LLM_API_KEY";
pub const ENV_RATE: &str = "EEGUNIFY_LLM_REQUESTS_PER_MINUTE";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const TIMEOUT: Duration = Duration::from_secs(30);
pub const MAX_HEADER_BYTES: usize = 4096;

const SYSTEM_PROMPT: &str = "You extract EEG recording metadata. Reply with exactly one JSON object \
and nothing else, of the form {\"channel_names\": [string, ...] or null, \"sampling_rate\": number or null}. \
Use null for anything the input does not state.";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("malformed response from LLM endpoint: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataSuggestion {
    pub channel_names: Option<Vec<String>>,
    pub sampling_rate: Option<f64>,
    pub confidence: Confidence,
    /// Assistant message text as received, for auditing.
    pub raw_response: String,
}

impl MetadataSuggestion {
    fn low(raw: impl Into<String>) -> Self {
        MetadataSuggestion {
            channel_names: None,
            sampling_rate: None,
            confidence: Confidence::Low,
            raw_response: raw.into(),
        }
    }
}

/// Endpoint settings read from the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub requests_per_minute: u32,
}

impl LlmConfig {
    pub fn from_env() -> Result<LlmConfig, LlmError> {
        let base_url = std::env::var(ENV_BASE_URL)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| {
                LlmError::EndpointUnreachable(format!(
                    "no endpoint configured; set {ENV_BASE_URL} (and optionally {ENV_MODEL}, {ENV_API_KEY})"
                ))
            })?;
        let requests_per_minute = std::env::var(ENV_RATE)
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&r| r > 0)
            .unwrap_or(60);
        Ok(LlmConfig {
            base_url,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            requests_per_minute,
        })
    }
}

/// Spaces requests at least `60 / rate` seconds apart across all clones.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(rate: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / f64::from(rate.max(1))),
            next: Mutex::new(None),
        }
    }

    pub fn unlimited() -> Self {
        RateLimiter {
            interval: Duration::ZERO,
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Clone)]
pub struct LlmClient {
    transport: Arc<dyn ChatTransport>,
    model: String,
    limiter: Arc<RateLimiter>,
}

impl LlmClient {
    /// Client for the endpoint named in the environment.
    pub fn from_env() -> Result<LlmClient, LlmError> {
        let cfg = LlmConfig::from_env()?;
        let limiter = Arc::new(RateLimiter::per_minute(cfg.requests_per_minute));
        Ok(LlmClient {
            transport: Arc::new(HttpTransport::new(
                &cfg.base_url,
                cfg.api_key.clone(),
                TIMEOUT,
            )),
            model: cfg.model,
            limiter,
        })
    }

    pub fn with_transport(
        transport: Arc<dyn ChatTransport>,
        model: impl Into<String>,
    ) -> LlmClient {
        LlmClient {
            transport,
            model: model.into(),
            limiter: Arc::new(RateLimiter::unlimited()),
        }
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> LlmClient {
        self.limiter = limiter;
        self
    }

    /// Request body for one user message. Temperature is pinned to 0.
    pub fn request_body(&self, user: &str) -> Value {
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user},
            ],
        })
    }

    pub fn infer_metadata_from_text(
        &self,
        description: &str,
    ) -> Result<MetadataSuggestion, LlmError> {
        self.ask(&format!("Dataset description:\n{description}"))
    }

    /// Sends at most [`MAX_HEADER_BYTES`] of `header`, hex-encoded.
    pub fn suggest_header_parse(
        &self,
        header: &[u8],
        context: &str,
    ) -> Result<MetadataSuggestion, LlmError> {
        if header.is_empty() {
            return Ok(MetadataSuggestion::low(""));
        }
        let excerpt = &header[..header.len().min(MAX_HEADER_BYTES)];
        self.ask(&format!(
            "Context: {context}\nFile header excerpt ({} bytes, hex):\n{}",
            excerpt.len(),
            hex::encode(excerpt)
        ))
    }

    /// One request, retried once if either the envelope or the content is
    /// malformed. A malformed envelope twice is an error; malformed content
    /// twice yields a low-confidence suggestion.
    fn ask(&self, user: &str) -> Result<MetadataSuggestion, LlmError> {
        let body = self.request_body(user).to_string();
        let mut last_envelope_error = None;
        let mut last_content = None;
        for _ in 0..2 {
            self.limiter.acquire();
            let raw = self.transport.send(&body)?;
            let content = match envelope_content(&raw) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("LLM envelope rejected: {e}");
                    last_envelope_error = Some(e);
                    continue;
                }
            };
            match parse_suggestion(&content) {
                Some(s) => return Ok(s),
                None => {
                    log::warn!("LLM reply does not match the expected schema");
                    last_content = Some(content);
                }
            }
        }
        match (last_content, last_envelope_error) {
            (Some(content), _) => Ok(MetadataSuggestion::low(content)),
            (None, Some(e)) => Err(LlmError::MalformedResponse(e)),
            (None, None) => unreachable!("two attempts were made"),
        }
    }
}

/// Assistant text from a chat-completion response body.
fn envelope_content(raw: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(raw).map_err(|e| format!("not JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "no choices[0].message.content".to_string())
}

/// Validates the reply against the `{channel_names, sampling_rate}` schema.
/// Returns `None` on any violation.
pub fn parse_suggestion(content: &str) -> Option<MetadataSuggestion> {
    let start = content.find('{')?;
    let end = content.rfind('}')?;
    let obj: serde_json::Map<String, Value> =
        serde_json::from_str(content.get(start..=end)?).ok()?;
    if !obj.contains_key("channel_names") && !obj.contains_key("sampling_rate") {
        return None;
    }
    let channel_names = match obj.get("channel_names") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                })
                .collect::<Option<Vec<_>>>()?,
        ),
        Some(_) => return None,
    };
    let sampling_rate = match obj.get("sampling_rate") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().filter(|x| *x > 0.0 && x.is_finite())?),
    };
    let informative =
        channel_names.as_ref().is_some_and(|c| !c.is_empty()) || sampling_rate.is_some();
    Some(MetadataSuggestion {
        channel_names,
        sampling_rate,
        confidence: if informative {
            Confidence::High
        } else {
            Confidence::Low
        },
        raw_response: content.to_string(),
    })
}

/// Copies the suggested values into `row` and re-validates it. Nothing is
/// applied unless the result passes validation.
pub fn apply_suggestion(
    row: &LocatorRow,
    s: &MetadataSuggestion,
) -> Result<LocatorRow, Vec<String>> {
    let mut out = row.clone();
    if let Some(names) = &s.channel_names {
        if !row.channel_names.is_empty() && names.len() != row.channel_names.len() {
            return Err(vec![format!(
                "suggestion lists {} channels but the row has {}",
                names.len(),
                row.channel_names.len()
            )]);
        }
        out.channel_names = names.clone();
    }
    if let Some(sr) = s.sampling_rate {
        out.sampling_rate = Some(sr);
        if let Some(n) = row.duration.zip(row.sampling_rate).map(|(d, old)| d * old) {
            out.duration = Some(n / sr);
        }
    }
    out.validate().map(|()| out)
}
