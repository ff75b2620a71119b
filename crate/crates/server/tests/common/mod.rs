#![allow(dead_code)]

use std::sync::Arc;

use qfaas_core::config::Config;
use qfaas_core::gateway::Gateway;
use qfaas_core::registry::{FnCode, PipelineMode};
use qfaas_server::Background;
use reqwest::blocking::Client;
use reqwest::Method;
use serde_json::{json, Value};

pub const ADMIN_PASSWORD: &str = "admin-secret";
pub const QRNG: &str = include_str!("../../../../functions/qrng.qf");
pub const BELL: &str = include_str!("../../../../functions/bell.qf");

/// Every authenticated route with a representative method.
pub const PROTECTED: &[(&str, &str)] = &[
    ("GET", "/api/users"),
    ("POST", "/api/users"),
    ("GET", "/api/functions"),
    ("POST", "/api/functions"),
    ("GET", "/api/functions/qiskit-qrng"),
    ("PUT", "/api/functions/qiskit-qrng"),
    ("DELETE", "/api/functions/qiskit-qrng"),
    ("GET", "/api/functions/qiskit-qrng/deployments"),
    ("POST", "/api/function/qiskit-qrng"),
    ("GET", "/api/job/00000000-0000-0000-0000-000000000000"),
    ("GET", "/api/jobs"),
    ("GET", "/api/backends"),
];

pub struct Api {
    pub server: Background,
    pub client: Client,
}

pub fn config() -> Config {
    Config {
        admin_password: Some(ADMIN_PASSWORD.into()),
        ..Config::ephemeral()
    }
}

impl Api {
    pub fn start() -> Self {
        Self::start_with(config(), PipelineMode::Inline)
    }

    pub fn start_with(config: Config, mode: PipelineMode) -> Self {
        let (gateway, _) = Gateway::open_with(config, mode).expect("gateway");
        Self::serve(Arc::new(gateway))
    }

    pub fn serve(gateway: Arc<Gateway>) -> Self {
        Self {
            server: Background::start(gateway).expect("server"),
            client: Client::builder()
                .timeout(std::time::Duration::from_secs(120))
                .build()
                .unwrap(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }

    pub fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<&Value>) -> (u16, Value) {
        let mut req = self.client.request(method, self.url(path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().expect("request");
        let status = resp.status().as_u16();
        let text = resp.text().unwrap_or_default();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub fn get(&self, path: &str, token: &str) -> (u16, Value) {
        self.call(Method::GET, path, Some(token), None)
    }

    pub fn post(&self, path: &str, token: &str, body: &Value) -> (u16, Value) {
        self.call(Method::POST, path, Some(token), Some(body))
    }

    pub fn login(&self, user: &str, password: &str) -> Result<String, u16> {
        let (status, body) = self.call(
            Method::POST,
            "/api/auth/login",
            None,
            Some(&json!({"username": user, "password": password})),
        );
        match status {
            200 => Ok(body["access_token"].as_str().unwrap().to_string()),
            s => Err(s),
        }
    }

    pub fn admin(&self) -> String {
        self.login("admin", ADMIN_PASSWORD).expect("admin login")
    }

    /// Creates a user through the admin API and returns their token.
    pub fn user(&self, name: &str, role: &str) -> String {
        let admin = self.admin();
        let (status, body) = self.post(
            "/api/users",
            &admin,
            &json!({"username": name, "password": format!("{name}-pw"), "role": role}),
        );
        assert_eq!(status, 201, "{body}");
        self.login(name, &format!("{name}-pw")).unwrap()
    }

    pub fn deploy(&self, token: &str, name: &str, source: &str, public: bool) -> (u16, Value) {
        self.post("/api/functions", token, &create_body(name, source, public))
    }

    pub fn invoke(&self, token: &str, identifier: &str, body: Value) -> (u16, Value) {
        self.post(&format!("/api/function/{identifier}"), token, &body)
    }

    pub fn metrics(&self) -> String {
        self.client.get(self.url("/metrics")).send().unwrap().text().unwrap()
    }
}

pub fn create_body(name: &str, source: &str, public: bool) -> Value {
    let code = FnCode::from_source(source);
    json!({
        "name": name,
        "template": "qiskit",
        "fnCode": {"requirements": code.requirements, "handlerPy": code.handler_py, "handlerQs": code.handler_qs},
        "public": public,
    })
}

pub fn counts_total(details: &Value) -> u64 {
    details["counts"]
        .as_object()
        .map(|m| m.values().map(|v| v.as_u64().unwrap()).sum())
        .unwrap_or(0)
}
