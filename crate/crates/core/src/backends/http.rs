//! Chat-completions HTTP adapter (OpenAI-compatible wire format).

use super::{LlmBackend, LlmRequest, LlmResponse};
use crate::prompting::Role;
use crate::{Error, Result};
use serde::Deserialize;
use std::time::Duration;

const MAX_TRIES: u32 = 3;

/// Talks to a chat-completions endpoint. The credential comes from the
/// environment variable named by `api_key_env`, never from config files.
/// Transient failures are retried with bounded exponential backoff.
pub struct HttpLlm {
    pub endpoint: String,
    pub api_key_env: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl HttpLlm {
    pub fn new(endpoint: String, api_key_env: String) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::LlmBackend(format!("client construction failed: {e}")))?;
        Ok(HttpLlm {
            endpoint,
            api_key_env,
            client,
        })
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.api_key_env).map_err(|_| {
            Error::LlmBackend(format!(
                "credential environment variable {} is not set",
                self.api_key_env
            ))
        })
    }

    fn body(request: &LlmRequest) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = request
            .prompt
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                serde_json::json!({"role": role, "content": m.content})
            })
            .collect();
        serde_json::json!({
            "model": request.model,
            "messages": messages,
            "n": request.n_samples,
            "temperature": request.temperature,
        })
    }

    fn try_once(&self, key: &str, body: &serde_json::Value) -> Result<LlmResponse> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(body)
            .send()
            .map_err(|e| Error::LlmBackend(format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(Error::LlmBackend(format!(
                "endpoint returned {status}: {text}"
            )));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| Error::LlmBackend(format!("malformed response: {e}")))?;
        Ok(LlmResponse {
            completions: parsed
                .choices
                .into_iter()
                .map(|c| c.message.content)
                .collect(),
        })
    }
}

impl LlmBackend for HttpLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        let key = self.api_key()?;
        let body = Self::body(request);
        let mut last_err = None;
        for attempt in 0..MAX_TRIES {
            match self.try_once(&key, &body) {
                Ok(response) => return Ok(response),
                Err(e) => {
                    last_err = Some(e);
                    if attempt + 1 < MAX_TRIES {
                        std::thread::sleep(Duration::from_millis(250 << attempt));
                    }
                }
            }
        }
        Err(last_err.unwrap_or_else(|| Error::LlmBackend("no attempt made".into())))
    }
}
