//! Generic chat-style HTTP backend.
//!
//! The wire shape is not hardcoded: an [`AdapterDescriptor`] holds a JSON
//! request template with `{model}` / `{prompt}` / `{temperature}` /
//! `{max_tokens}` placeholders and a JSON pointer to the generated text in
//! the response, so any vendor fits without code changes. The default
//! descriptor speaks the common `/chat/completions` dialect.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendConfig, LlmError};

/// Raw transport under the HTTP backend; tests swap in scripted fakes.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<TransportResponse, LlmError>;
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// Blocking reqwest-backed transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<TransportResponse, LlmError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        for (name, value) in headers {
            req = req.header(name, value);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::BackendTimeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp
            .text()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(TransportResponse { status, body })
    }
}

/// Request template plus response text pointer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterDescriptor {
    pub request_body: Value,
    /// RFC 6901 pointer to the generated text within the response JSON.
    pub response_text_pointer: String,
    pub auth_header: String,
    /// `{secret}` is replaced with the value of the configured env var.
    pub auth_value_template: String,
    pub extra_headers: Vec<(String, String)>,
}

impl Default for AdapterDescriptor {
    fn default() -> Self {
        AdapterDescriptor {
            request_body: serde_json::json!({
                "model": "{model}",
                "messages": [{"role": "user", "content": "{prompt}"}],
                "temperature": "{temperature}",
                "max_tokens": "{max_tokens}",
            }),
            response_text_pointer: "/choices/0/message/content".into(),
            auth_header: "Authorization".into(),
            auth_value_template: "Bearer {secret}".into(),
            extra_headers: Vec::new(),
        }
    }
}

impl AdapterDescriptor {
    pub fn from_path(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("bad adapter descriptor: {e}")))
    }

    /// Fill the request template. A string value that is exactly a numeric
    /// placeholder becomes a JSON number; placeholders inside longer strings
    /// substitute textually.
    pub fn instantiate(&self, prompt: &str, cfg: &BackendConfig) -> Value {
        fn fill(value: &Value, prompt: &str, cfg: &BackendConfig) -> Value {
            match value {
                Value::String(s) if s == "{temperature}" => {
                    serde_json::json!(cfg.temperature)
                }
                Value::String(s) if s == "{max_tokens}" => {
                    serde_json::json!(cfg.max_output_tokens)
                }
                Value::String(s) => {
                    let filled = s
                        .replace("{model}", &cfg.model_name)
                        .replace("{prompt}", prompt)
                        .replace("{temperature}", &cfg.temperature.to_string())
                        .replace("{max_tokens}", &cfg.max_output_tokens.to_string());
                    Value::String(filled)
                }
                Value::Array(items) => {
                    Value::Array(items.iter().map(|v| fill(v, prompt, cfg)).collect())
                }
                Value::Object(map) => Value::Object(
                    map.iter()
                        .map(|(k, v)| (k.clone(), fill(v, prompt, cfg)))
                        .collect(),
                ),
                other => other.clone(),
            }
        }
        fill(&self.request_body, prompt, cfg)
    }

    /// Pull the generated text from a response body.
    pub fn extract_text(&self, body: &str) -> Result<String, LlmError> {
        let value: Value = serde_json::from_str(body)
            .map_err(|e| LlmError::BadResponse(format!("response is not JSON: {e}")))?;
        let text = value.pointer(&self.response_text_pointer).ok_or_else(|| {
            LlmError::BadResponse(format!(
                "pointer {:?} not found in response",
                self.response_text_pointer
            ))
        })?;
        match text {
            Value::String(s) => Ok(s.clone()),
            other => Err(LlmError::BadResponse(format!(
                "pointer {:?} is not a string: {other}",
                self.response_text_pointer
            ))),
        }
    }

    pub fn headers(&self, secret: Option<&str>) -> Vec<(String, String)> {
        let mut headers = self.extra_headers.clone();
        if let Some(secret) = secret {
            headers.push((
                self.auth_header.clone(),
                self.auth_value_template.replace("{secret}", secret),
            ));
        }
        headers
    }
}

/// Statuses worth retrying: rate limiting and transient server trouble.
pub fn retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504 | 529)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::BackendKind;

    fn cfg() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: Some("http://example.invalid/v1/chat/completions".into()),
            model_name: "demo-model".into(),
            temperature: 0.0,
            max_output_tokens: 256,
            ..BackendConfig::default()
        }
    }

    #[test]
    fn default_adapter_builds_chat_body() {
        let body = AdapterDescriptor::default().instantiate("What class?", &cfg());
        assert_eq!(body["model"], "demo-model");
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "What class?");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 256);
    }

    #[test]
    fn placeholders_substitute_inside_longer_strings() {
        let adapter = AdapterDescriptor {
            request_body: serde_json::json!({
                "input": "model={model} t={temperature} q={prompt}",
            }),
            ..AdapterDescriptor::default()
        };
        let body = adapter.instantiate("hi", &cfg());
        assert_eq!(body["input"], "model=demo-model t=0 q=hi");
    }

    #[test]
    fn extracts_text_through_pointer() {
        let adapter = AdapterDescriptor::default();
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Betalactams."}}]}"#;
        assert_eq!(adapter.extract_text(body).unwrap(), "Betalactams.");
        assert!(adapter.extract_text("{}").is_err());
        assert!(adapter.extract_text("not json").is_err());
    }

    #[test]
    fn auth_header_carries_the_secret() {
        let headers = AdapterDescriptor::default().headers(Some("sk-test"));
        assert_eq!(
            headers,
            vec![("Authorization".into(), "Bearer sk-test".into())]
        );
        assert!(AdapterDescriptor::default().headers(None).is_empty());
    }

    #[test]
    fn adapter_descriptor_loads_from_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapter.json");
        std::fs::write(
            &path,
            r#"{
                "request_body": {"model": "{model}", "input": "{prompt}"},
                "response_text_pointer": "/output/0/text",
                "auth_header": "x-api-key",
                "auth_value_template": "{secret}"
            }"#,
        )
        .unwrap();
        let adapter = AdapterDescriptor::from_path(&path).unwrap();
        let body = adapter.instantiate("hello", &cfg());
        assert_eq!(body["input"], "hello");
        assert_eq!(
            adapter.headers(Some("k-123")),
            vec![("x-api-key".to_string(), "k-123".to_string())]
        );
        assert_eq!(
            adapter
                .extract_text(r#"{"output":[{"text":"Phenicol."}]}"#)
                .unwrap(),
            "Phenicol."
        );
    }

    #[test]
    fn retryable_statuses() {
        for s in [408, 429, 500, 502, 503, 504, 529] {
            assert!(retryable_status(s), "{s}");
        }
        for s in [200, 400, 401, 403, 404, 422] {
            assert!(!retryable_status(s), "{s}");
        }
    }
}
