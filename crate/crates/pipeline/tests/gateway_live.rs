//! Wire-level behavior of the live chat backend, exercised against a
//! scripted loopback server. No external network is touched.

use std::sync::Arc;
use std::time::Duration;

use chatstub::{Step, StubServer};
use droidtriage_pipeline::{
    complete, AgentId, AgentSuite, ChatExchange, CorpusIndex, GatewayError, LiveBackend,
    ReferenceIconSet, RiskLexicon, TaskKind,
};

fn backend(server: &StubServer) -> LiveBackend {
    LiveBackend::new(&server.base_url(), "triage-test", None)
        .unwrap()
        .with_backoff_base(Duration::from_millis(10))
}

#[test]
fn request_carries_model_messages_and_default_temperature() {
    let server = StubServer::start(vec![Step::ok("{\"risk_score\": 0.1}")]);
    let exchange = ChatExchange::new("system text", "user text");
    let done = complete(&backend(&server), AgentId::IconAnalyst, &exchange).unwrap();
    assert_eq!(done.response_text.as_deref(), Some("{\"risk_score\": 0.1}"));

    let requests = server.requests();
    assert_eq!(requests.len(), 1);
    let body = &requests[0];
    assert_eq!(body["model"], "triage-test");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "system text");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "user text");
}

#[test]
fn explicit_temperature_overrides_the_default() {
    let server = StubServer::start(vec![Step::ok("ok")]);
    let exchange = ChatExchange::new("s", "u").with_temperature(0.9);
    complete(&backend(&server), AgentId::ContentAnalyst, &exchange).unwrap();
    assert_eq!(server.requests()[0]["temperature"], 0.9);
}

#[test]
fn rate_limits_are_retried_until_success() {
    let server = StubServer::start(vec![
        Step::status(429, "slow down"),
        Step::status(429, "slow down"),
        Step::ok("third time lucky"),
    ]);
    let exchange = ChatExchange::new("s", "u");
    let done = complete(&backend(&server), AgentId::LinkAnalyst, &exchange).unwrap();
    assert_eq!(done.response_text.as_deref(), Some("third time lucky"));
    assert_eq!(server.request_count(), 3);
}

#[test]
fn rate_limit_gives_up_after_three_attempts() {
    let server = StubServer::start(vec![Step::status(429, "no")]);
    let exchange = ChatExchange::new("s", "u");
    match complete(&backend(&server), AgentId::LinkAnalyst, &exchange) {
        Err(GatewayError::RateLimited { attempts }) => assert_eq!(attempts, 3),
        other => panic!("expected RateLimited, got {other:?}"),
    }
    assert_eq!(server.request_count(), 3);
}

#[test]
fn server_errors_are_retried_then_reported() {
    let server = StubServer::start(vec![Step::status(503, "down")]);
    let exchange = ChatExchange::new("s", "u");
    match complete(&backend(&server), AgentId::PackageTracer, &exchange) {
        Err(GatewayError::Transport(msg)) => assert!(msg.contains("503")),
        other => panic!("expected Transport, got {other:?}"),
    }
    assert_eq!(server.request_count(), 3);
}

#[test]
fn auth_rejection_fails_immediately() {
    let server = StubServer::start(vec![Step::status(401, "who are you")]);
    let exchange = ChatExchange::new("s", "u");
    match complete(&backend(&server), AgentId::PermissionAnalyst, &exchange) {
        Err(GatewayError::AuthError(status)) => assert_eq!(status, 401),
        other => panic!("expected AuthError, got {other:?}"),
    }
    assert_eq!(server.request_count(), 1);
}

#[test]
fn api_key_travels_as_bearer_header_only_when_set() {
    let server = StubServer::start(vec![Step::ok("ok")]);
    let with_key = LiveBackend::new(&server.base_url(), "m", Some("sk-local-test".into()))
        .unwrap()
        .with_backoff_base(Duration::from_millis(10));
    complete(&with_key, AgentId::IconAnalyst, &ChatExchange::new("s", "u")).unwrap();
    // The stub records bodies, not headers; a present key must not alter
    // the payload itself.
    assert!(server.requests()[0].get("api_key").is_none());
}

#[test]
fn malformed_payload_is_a_transport_error() {
    let server = StubServer::start(vec![Step::status(200, "{\"choices\": []}")]);
    let exchange = ChatExchange::new("s", "u");
    assert!(matches!(
        complete(&backend(&server), AgentId::ContentAnalyst, &exchange),
        Err(GatewayError::Transport(_))
    ));
}

#[test]
fn slow_response_times_out() {
    let server = StubServer::start(vec![Step::delayed("too late", Duration::from_secs(2))]);
    let slow = LiveBackend::with_timeout(
        &server.base_url(),
        "m",
        None,
        Duration::from_millis(300),
    )
    .unwrap();
    let exchange = ChatExchange::new("s", "u");
    assert!(matches!(
        complete(&slow, AgentId::CertificateChecker, &exchange),
        Err(GatewayError::Timeout(_))
    ));
}

#[test]
fn script_tables_load_from_disk() {
    use droidtriage_pipeline::ScriptedBackend;
    let exchange = ChatExchange::new("s", "scripted question");
    let key = ScriptedBackend::key(AgentId::PackageTracer, &exchange.user_text);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("script.json");
    std::fs::write(
        &path,
        serde_json::json!({ &key: "scripted answer" }).to_string(),
    )
    .unwrap();
    let backend = ScriptedBackend::from_file(&path).unwrap();
    let done = complete(&backend, AgentId::PackageTracer, &exchange).unwrap();
    assert_eq!(done.response_text.as_deref(), Some("scripted answer"));

    let missing = ScriptedBackend::from_file(&dir.path().join("absent.json"));
    assert!(matches!(missing, Err(GatewayError::BadScript(_))));
}

#[test]
fn suite_turns_timeout_into_abstention() {
    let server = StubServer::start(vec![Step::delayed("too late", Duration::from_secs(2))]);
    let slow = LiveBackend::with_timeout(
        &server.base_url(),
        "m",
        None,
        Duration::from_millis(300),
    )
    .unwrap();
    let suite = AgentSuite::chat(
        Arc::new(RiskLexicon::builtin().clone()),
        Arc::new(ReferenceIconSet::builtin().clone()),
        Arc::new(CorpusIndex::new()),
        chrono::Utc::now(),
        Arc::new(slow),
        0.5,
    );
    let bundle = droidtriage_apk::ApkFeatureBundle {
        manifest: droidtriage_apk::ManifestInfo {
            package_name: "com.example.app".into(),
            version_code: 1,
            version_name: "1.0".into(),
            app_label: "App".into(),
            permissions: vec![],
            activities: vec![],
            services: vec![],
            icon_ref: None,
        },
        certificate: None,
        icon: None,
        dex_strings: droidtriage_apk::DexStringTable::default(),
        urls: vec![],
        fingerprints: droidtriage_apk::Fingerprints::over(b"x"),
    };
    let finding = suite.run_kind(TaskKind::PackageTrace, &bundle);
    assert!(finding.is_abstention());
    assert!(finding.evidence.iter().any(|e| e.detail().contains("timed out")));
}
