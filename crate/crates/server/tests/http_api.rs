mod common;

use std::time::{Duration, Instant};

use common::*;
use qfaas_core::metrics::read_sample;
use qfaas_core::registry::PipelineMode;
use reqwest::Method;
use serde_json::{json, Value};

#[test]
fn every_protected_route_demands_a_token() {
    let api = Api::start();
    let body = json!({});
    for (method, path) in PROTECTED {
        let m: Method = method.parse().unwrap();
        for token in [None, Some("not-a-token")] {
            let (status, err) = api.call(m.clone(), path, token, Some(&body));
            assert_eq!(status, 401, "{method} {path} with {token:?}");
            assert_eq!(err["error"], "unauthorized");
        }
    }
    let metrics = api.client.get(api.url("/metrics")).send().unwrap();
    assert_eq!(metrics.status(), 200);
    let ui = api.client.get(api.url("/ui/")).send().unwrap();
    assert_eq!(ui.status(), 200);
    assert!(ui.text().unwrap().contains("<html"));
}

#[test]
fn login_accepts_json_and_form() {
    let api = Api::start();
    assert!(api.login("admin", ADMIN_PASSWORD).is_ok());
    assert_eq!(api.login("admin", "wrong"), Err(401));
    assert_eq!(api.login("nobody", "wrong"), Err(401));
    let resp = api
        .client
        .post(api.url("/api/auth/login"))
        .header("content-type", "application/x-www-form-urlencoded")
        .body(format!("grant_type=password&username=admin&password={ADMIN_PASSWORD}"))
        .send()
        .unwrap();
    assert_eq!(resp.status(), 200);
    let body: Value = resp.json().unwrap();
    assert_eq!(body["token_type"], "bearer");
    assert_eq!(body["expires_in"], 3600);
}

#[test]
fn expired_tokens_are_rejected() {
    let api = Api::start_with(
        qfaas_core::config::Config {
            token_ttl_secs: 1,
            ..config()
        },
        PipelineMode::Inline,
    );
    let token = api.admin();
    assert_eq!(api.get("/api/backends", &token).0, 200);
    std::thread::sleep(Duration::from_millis(1300));
    assert_eq!(api.get("/api/backends", &token).0, 401);
}

#[test]
fn user_management_is_admin_only() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    let (status, _) = api.post(
        "/api/users",
        &dev,
        &json!({"username": "x", "password": "y", "role": "admin"}),
    );
    assert_eq!(status, 403);
    let (status, users) = api.get("/api/users", &api.admin());
    assert_eq!(status, 200);
    let names: Vec<&str> = users.as_array().unwrap().iter().map(|u| u["username"].as_str().unwrap()).collect();
    assert_eq!(names, ["admin", "dev"]);
    let (status, _) = api.post(
        "/api/users",
        &api.admin(),
        &json!({"username": "dev", "password": "y", "role": "enduser"}),
    );
    assert_eq!(status, 409);
}

#[test]
fn function_lifecycle() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    let other = api.user("other", "developer");

    let (status, body) = api.deploy(&dev, "qrng", QRNG, true);
    assert_eq!(status, 202, "{body}");
    assert_eq!(body["identifier"], "qiskit-qrng");
    assert_eq!(body["deployment"]["identifier"], "qiskit-qrng");
    assert_eq!(body["status"], "Registered");
    assert_eq!(api.get("/api/functions/qiskit-qrng", &dev).1["status"], "Ready");

    let (status, dup) = api.deploy(&dev, "qrng", QRNG, true);
    assert_eq!((status, dup["error"].as_str()), (409, Some("conflict")));

    assert_eq!(api.get("/api/functions/qiskit-nope", &dev).0, 404);
    let (status, _) = api.call(
        Method::PUT,
        "/api/functions/qiskit-qrng",
        Some(&other),
        Some(&json!({"public": false})),
    );
    assert_eq!(status, 403);

    let (status, body) = api.call(
        Method::PUT,
        "/api/functions/qiskit-qrng",
        Some(&dev),
        Some(&json!({"public": false})),
    );
    assert_eq!(status, 202, "{body}");
    assert_eq!(body["version"], 2);
    let (_, deps) = api.get("/api/functions/qiskit-qrng/deployments", &dev);
    assert_eq!(deps.as_array().unwrap().len(), 2);

    let (status, _) = api.call(Method::DELETE, "/api/functions/qiskit-qrng", Some(&dev), None);
    assert_eq!(status, 200);
    assert_eq!(api.get("/api/functions/qiskit-qrng", &dev).0, 404);
}

#[test]
fn enduser_cannot_deploy() {
    let api = Api::start();
    let end = api.user("end", "enduser");
    assert_eq!(api.deploy(&end, "qrng", QRNG, true).0, 403);
}

#[test]
fn invalid_source_fails_at_validate_with_line_number() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    let broken = "fn broken\ncircuit {\n  qubits 2\n  h 0\n}\n";
    let (status, body) = api.deploy(&dev, "broken", broken, true);
    assert_eq!(status, 202);
    assert_eq!(body["status"], "Registered");
    assert_eq!(api.get("/api/functions/qiskit-broken", &dev).1["status"], "FailedDeploy");
    let (_, deps) = api.get("/api/functions/qiskit-broken/deployments", &dev);
    let validate = &deps[0]["stages"][0];
    assert_eq!(validate["stage"], "Validate");
    assert_eq!(validate["status"], "failed");
    assert!(validate["log"].as_str().unwrap().contains(" at 2:1:"), "{validate}");
    assert_eq!(api.invoke(&dev, "qiskit-broken", json!({})).0, 404);
}

#[test]
fn background_pipeline_reports_progress_then_ready() {
    let api = Api::start_with(config(), PipelineMode::Background);
    let dev = api.user("dev", "developer");
    let (status, body) = api.deploy(&dev, "qrng", QRNG, true);
    assert_eq!(status, 202);
    let early = body["status"].as_str().unwrap();
    assert!(
        ["Registered", "Validating", "Building", "Deploying", "Ready"].contains(&early),
        "{early}"
    );
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        let (_, f) = api.get("/api/functions/qiskit-qrng", &dev);
        if f["status"] == "Ready" {
            break;
        }
        assert!(Instant::now() < deadline, "{f}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn invocation_contract() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    api.deploy(&dev, "qrng", QRNG, true);

    let (status, resp) = api.invoke(
        &dev,
        "qiskit-qrng",
        json!({"input": 4, "shots": 1024, "backendName": "local-sv"}),
    );
    assert_eq!(status, 200, "{resp}");
    assert!(resp["data"].as_u64().unwrap() < 16);
    assert_eq!(counts_total(&resp["details"]), 1024);
    for key in ["jobId", "status", "backend", "provider", "shots", "seed", "waiting_ms", "running_ms", "circuit"] {
        assert!(resp["details"].get(key).is_some(), "missing {key}");
    }
    let job_id = resp["details"]["jobId"].as_str().unwrap().to_string();

    let (status, again) = api.invoke(
        &dev,
        "qiskit-qrng",
        json!({"input": 4, "postProcessOnly": true, "jobId": job_id}),
    );
    assert_eq!(status, 200);
    assert_eq!(again["data"], resp["data"]);

    let cases = [
        (json!({"postProcessOnly": true}), 422),
        (json!({"input": 4, "autoSelect": false}), 422),
        (json!({"input": 4, "shots": 0}), 422),
        (json!({"input": 99}), 422),
        (json!({"input": 4, "bogus": 1}), 422),
        (json!({"input": 4, "backendName": "nope"}), 422),
        (json!({"input": 4, "provider": "nowhere"}), 503),
    ];
    for (body, want) in cases {
        let (status, err) = api.invoke(&dev, "qiskit-qrng", body.clone());
        assert_eq!(status, want, "{body} -> {err}");
        assert!(err["error"].is_string() && err["message"].is_string() && err.get("details").is_some());
    }
    assert_eq!(api.invoke(&dev, "qiskit-missing", json!({})).0, 404);
    let (status, _) = api.call(
        Method::POST,
        "/api/function/qiskit-qrng",
        Some(&dev),
        None,
    );
    assert_eq!(status, 422);
}

#[test]
fn no_eligible_backend_lists_rejections() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    api.deploy(&dev, "qrng", QRNG, true);
    let (status, err) = api.invoke(&dev, "qiskit-qrng", json!({"input": 4, "backendType": "qpu", "provider": "local"}));
    assert_eq!(status, 503);
    let rejections = err["details"]["rejections"].as_array().unwrap();
    for backend in ["local-sv", "mock-ibm-q5", "mock-braket-sv"] {
        assert!(rejections.iter().any(|r| r["backend"] == backend), "{backend}");
    }
}

#[test]
fn seeded_invocations_are_deterministic() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    api.deploy(&dev, "qrng", QRNG, true);
    let body = json!({"input": 5, "shots": 512, "seed": 42, "backendName": "local-sv"});
    let (_, a) = api.invoke(&dev, "qiskit-qrng", body.clone());
    let (_, b) = api.invoke(&dev, "qiskit-qrng", body);
    assert_eq!(a["details"]["counts"], b["details"]["counts"]);
    assert_eq!(a["details"]["seed"], 42);
}

#[test]
fn private_functions_and_job_ownership() {
    let api = Api::start();
    let dev = api.user("dev", "developer");
    let alice = api.user("alice", "enduser");
    let bob = api.user("bob", "enduser");
    api.deploy(&dev, "secret", BELL, false);
    api.deploy(&dev, "bell", BELL, true);

    let (_, listed) = api.get("/api/functions", &alice);
    let ids: Vec<&str> = listed.as_array().unwrap().iter().map(|f| f["identifier"].as_str().unwrap()).collect();
    assert_eq!(ids, ["qiskit-bell"]);
    assert_eq!(api.invoke(&alice, "qiskit-secret", json!({})).0, 403);
    assert_eq!(api.get("/api/functions/qiskit-secret", &alice).0, 403);

    let (status, resp) = api.invoke(&alice, "qiskit-bell", json!({"shots": 64}));
    assert_eq!(status, 200, "{resp}");
    let job = resp["details"]["jobId"].as_str().unwrap();
    let (status, got) = api.get(&format!("/api/job/{job}"), &alice);
    assert_eq!(status, 200);
    assert_eq!(got["status"], "Completed");
    assert!(got["counts"].is_object() && got["result_data"].is_object());
    assert_eq!(api.get(&format!("/api/job/{job}"), &bob).0, 403);
    assert_eq!(api.get("/api/job/missing", &bob).0, 404);

    api.invoke(&bob, "qiskit-bell", json!({"shots": 8}));
    let (_, all) = api.get("/api/jobs", &api.admin());
    assert_eq!(all["total"], 2);
    let (_, mine) = api.get("/api/jobs?owner=alice", &bob);
    assert_eq!(mine["total"], 1);
    assert_eq!(mine["items"][0]["owner"], "bob");
    let (_, failed) = api.get("/api/jobs?status=Failed", &api.admin());
    assert_eq!(failed["total"], 0);
    assert_eq!(api.get("/api/jobs?status=Sideways", &bob).0, 422);
}

#[test]
fn backends_and_metrics() {
    let api = Api::start();
    let text = api.metrics();
    for series in ["invocations_total", "jobs_completed_total", "jobs_failed_total"] {
        assert_eq!(read_sample(&text, series), Some(0.0), "{series}");
    }
    let dev = api.user("dev", "developer");
    let (status, backends) = api.get("/api/backends", &dev);
    assert_eq!(status, 200);
    let names: Vec<&str> = backends.as_array().unwrap().iter().map(|b| b["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"local-sv") && names.contains(&"mock-ibm-q5"));
    assert!(backends.as_array().unwrap().iter().all(|b| b["queue_length"].is_u64()));
    let (_, qpus) = api.get("/api/backends?type=qpu", &dev);
    assert!(qpus.as_array().unwrap().iter().all(|b| b["kind"] == "qpu"));

    api.deploy(&dev, "bell", BELL, true);
    api.invoke(&dev, "qiskit-bell", json!({"shots": 16, "backendName": "local-sv"}));
    let text = api.metrics();
    assert_eq!(read_sample(&text, "invocations_total"), Some(1.0));
    assert_eq!(read_sample(&text, "jobs_completed_total"), Some(1.0));
    assert_eq!(read_sample(&text, "queue_depth{backend=\"local-sv\"}"), Some(0.0));
    assert!(read_sample(&text, "http_requests_total{code=\"200\"}").unwrap() >= 3.0);
}

#[test]
fn unknown_routes_are_404_envelopes() {
    let api = Api::start();
    let (status, body) = api.call(Method::GET, "/api/nope", None, None);
    assert_eq!(status, 404);
    assert_eq!(body["error"], "not_found");
}

#[test]
fn restart_keeps_functions_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = qfaas_core::config::Config {
        data_dir: Some(dir.path().to_path_buf()),
        durable: true,
        ..config()
    };
    let job = {
        let api = Api::start_with(cfg.clone(), PipelineMode::Inline);
        let dev = api.user("dev", "developer");
        api.deploy(&dev, "bell", BELL, true);
        let (_, resp) = api.invoke(&dev, "qiskit-bell", json!({"shots": 32}));
        resp["details"]["jobId"].as_str().unwrap().to_string()
    };
    let api = Api::start_with(cfg, PipelineMode::Inline);
    let dev = api.login("dev", "dev-pw").unwrap();
    let (status, got) = api.get(&format!("/api/job/{job}"), &dev);
    assert_eq!(status, 200);
    assert_eq!(got["status"], "Completed");
    assert_eq!(api.get("/api/functions/qiskit-bell", &dev).1["status"], "Ready");
}
