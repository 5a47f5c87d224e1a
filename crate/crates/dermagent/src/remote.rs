//! Remote chat wire protocol and transport with bounded retry.
//!
//! Request: `{model, messages: [{role, content}], image?: base64}`.
//! Response: `{content}`. This shape is the compatibility contract for any
//! backend shim, shared by the remote planner and remote tool adapters.

use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TransportError};

pub const AUTH_TOKEN_ENV: &str = "DERMAGENT_API_TOKEN";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, TransportError>;
}

/// Endpoint configuration for the HTTP transport.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

impl RemoteEndpoint {
    /// Auth token from config, falling back to the environment.
    pub fn resolved_token(&self) -> Option<String> {
        self.auth_token
            .clone()
            .or_else(|| std::env::var(AUTH_TOKEN_ENV).ok())
    }
}

pub struct HttpChatTransport {
    endpoint: RemoteEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpChatTransport {
    pub fn new(endpoint: RemoteEndpoint) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| TransportError::Connect(e.to_string()))?;
        Ok(HttpChatTransport { endpoint, client })
    }
}

impl ChatTransport for HttpChatTransport {
    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, TransportError> {
        let mut builder = self.client.post(&self.endpoint.url).json(request);
        if let Some(token) = self.endpoint.resolved_token() {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connect(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        response
            .json::<ChatResponse>()
            .map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

/// Bounded retry with exponential backoff, applied to transient transport
/// failures only.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // Backoff schedule: 1s after the first failure, 2s after the second.
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base * 2^(retry-1).
    pub fn delay_for(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

/// A chat client combining a transport with the retry policy.
pub struct RemoteChat {
    transport: Arc<dyn ChatTransport>,
    pub model: String,
    pub retry: RetryPolicy,
}

impl RemoteChat {
    pub fn new(transport: Arc<dyn ChatTransport>, model: impl Into<String>) -> Self {
        RemoteChat {
            transport,
            model: model.into(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Send messages (plus optional raw image bytes, base64-encoded on the
    /// wire) and return the model's text.
    pub fn chat(
        &self,
        messages: Vec<ChatMessage>,
        image: Option<&[u8]>,
    ) -> std::result::Result<String, TransportError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages,
            image: image.map(|bytes| base64::engine::general_purpose::STANDARD.encode(bytes)),
        };
        let mut last_error = None;
        for attempt in 1..=self.retry.max_attempts {
            match self.transport.send(&request) {
                Ok(response) => return Ok(response.content),
                Err(err) => {
                    let transient = err.is_transient();
                    last_error = Some(err);
                    if !transient || attempt == self.retry.max_attempts {
                        break;
                    }
                    std::thread::sleep(self.retry.delay_for(attempt));
                }
            }
        }
        Err(last_error.expect("at least one attempt"))
    }
}

/// Convenience wrapper matching the operation signature used elsewhere.
pub fn remote_chat(
    messages: Vec<ChatMessage>,
    image: Option<&[u8]>,
    endpoint: &RemoteEndpoint,
) -> Result<String> {
    let transport = Arc::new(HttpChatTransport::new(endpoint.clone())?);
    let chat = RemoteChat::new(transport, endpoint.model.clone());
    Ok(chat.chat(messages, image)?)
}
