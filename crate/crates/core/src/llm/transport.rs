use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::LlmError;

/// Sends a serialised chat-completion request and returns the raw body.
pub trait ChatTransport: Send + Sync {
    fn send(&self, body: &str) -> Result<String, LlmError>;
}

/// POSTs to `<base_url>/chat/completions`.
pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            agent,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, body: &str) -> Result<String, LlmError> {
        let unreachable =
            |e: ureq::Error| LlmError::EndpointUnreachable(format!("{}: {e}", self.url));
        let mut req = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(unreachable)?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(unreachable)?;
        if !status.is_success() {
            let excerpt: String = text.chars().take(200).collect();
            return Err(LlmError::EndpointUnreachable(format!(
                "{} returned {status}: {excerpt}",
                self.url
            )));
        }
        Ok(text)
    }
}

/// Replays canned response bodies in order and records what was sent.
/// Once the script runs out every further request fails as unreachable.
pub struct MockTransport {
    replies: Mutex<VecDeque<String>>,
    sent: Mutex<Vec<String>>,
}

impl MockTransport {
    pub fn new(replies: Vec<String>) -> Self {
        MockTransport {
            replies: Mutex::new(replies.into()),
            sent: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<String> {
        self.sent.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatTransport for MockTransport {
    fn send(&self, body: &str) -> Result<String, LlmError> {
        self.sent
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(body.to_string());
        self.replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or_else(|| {
                LlmError::EndpointUnreachable("mock transport has no more replies".into())
            })
    }
}
