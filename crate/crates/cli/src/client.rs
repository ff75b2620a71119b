//! Thin blocking client for the gateway API.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use reqwest::{Method, Url};
use serde_json::Value;

/// Why a call failed, mapped one-to-one onto exit codes.
#[derive(Debug)]
pub enum CallError {
    /// 401 from the server or no token configured.
    Auth(String),
    /// Any other non-2xx response; carries the status and error envelope.
    Server(u16, Value),
    /// The request never got an HTTP response.
    Transport(String),
}

impl CallError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CallError::Auth(_) => 1,
            CallError::Server(..) => 2,
            CallError::Transport(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CallError::Auth(m) => format!("authentication failed: {m}"),
            CallError::Server(status, body) => match (body["error"].as_str(), body["message"].as_str()) {
                (Some(code), Some(msg)) => format!("server returned {status} {code}: {msg}"),
                _ => format!("server returned {status}: {body}"),
            },
            CallError::Transport(m) => format!("cannot reach server: {m}"),
        }
    }
}

pub struct Api {
    base: String,
    token: Option<String>,
    http: Client,
}

impl Api {
    pub fn new(base: &str, token: Option<String>) -> Result<Self, CallError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| CallError::Transport(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            token,
            http,
        })
    }

    /// `base/seg/seg?k=v` with every segment and pair percent-encoded.
    pub fn url(&self, segments: &[&str], query: &[(&str, &str)]) -> Result<Url, CallError> {
        let mut url = Url::parse(&self.base).map_err(|e| CallError::Transport(format!("bad server URL: {e}")))?;
        url.path_segments_mut()
            .map_err(|_| CallError::Transport(format!("bad server URL: {}", self.base)))?
            .pop_if_empty()
            .extend(segments);
        if !query.is_empty() {
            url.query_pairs_mut().extend_pairs(query);
        }
        Ok(url)
    }

    fn request(&self, method: Method, url: Url) -> RequestBuilder {
        self.http.request(method, url)
    }

    fn send(&self, req: RequestBuilder) -> Result<Value, CallError> {
        let resp = req.send().map_err(|e| CallError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| CallError::Transport(e.to_string()))?;
        let body = serde_json::from_str(&text).unwrap_or(Value::String(text));
        match status {
            200..=299 => Ok(body),
            401 => Err(CallError::Auth(body["message"].as_str().unwrap_or("unauthorized").to_string())),
            _ => Err(CallError::Server(status, body)),
        }
    }

    pub fn call(&self, method: Method, url: Url, body: Option<&Value>) -> Result<Value, CallError> {
        let token = self
            .token
            .as_deref()
            .ok_or_else(|| CallError::Auth("not logged in; run `qfaas login <user>`".into()))?;
        let mut req = self.request(method, url).bearer_auth(token);
        if let Some(b) = body {
            req = req.json(b);
        }
        self.send(req)
    }

    pub fn get(&self, segments: &[&str], query: &[(&str, &str)]) -> Result<Value, CallError> {
        self.call(Method::GET, self.url(segments, query)?, None)
    }

    pub fn post(&self, segments: &[&str], body: &Value) -> Result<Value, CallError> {
        self.call(Method::POST, self.url(segments, &[])?, Some(body))
    }

    pub fn login(&self, username: &str, password: &str) -> Result<Value, CallError> {
        let body = serde_json::json!({ "username": username, "password": password });
        let url = self.url(&["api", "auth", "login"], &[])?;
        self.send(self.request(Method::POST, url).json(&body))
    }
}
