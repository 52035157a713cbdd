use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use uie_infer::journal::EntryStatus;
use uie_infer::mock::{serve, Latency, MockError, MockMode, MockScript, RecordOverride};
use uie_infer::run::{JOURNAL_FILE, MANIFEST_FILE};
use uie_infer::{read_journal, resume_run, run_inference, ChatClient, EndpointConfig, InferError, InferRequest, RunManifest};

fn corpus(n: usize) -> (Vec<InferRequest>, HashMap<String, String>) {
    let reqs: Vec<InferRequest> = (0..n)
        .map(|i| InferRequest {
            record_id: format!("d-{i:03}"),
            instruction: "Extract the entities.".into(),
            input: format!("text number {i}"),
        })
        .collect();
    let gold = reqs
        .iter()
        .map(|r| (r.record_id.clone(), format!(r#"{{"PER": ["p{}"]}}"#, r.record_id)))
        .collect();
    (reqs, gold)
}

fn endpoint(base_url: String) -> EndpointConfig {
    let mut e = EndpointConfig::new(base_url, "mock");
    e.tag_record_ids = true;
    e.backoff_base_ms = 1;
    e.concurrency = 4;
    e
}

#[tokio::test]
async fn echo_run_is_complete_and_verbatim() {
    let (reqs, gold) = corpus(100);
    let script = MockScript {
        latency: Latency { min_ms: 1, max_ms: 5 },
        ..Default::default()
    };
    let mock = serve(script, gold.clone(), 0).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_inference(reqs, &endpoint(mock.base_url()), dir.path()).await.unwrap();
    assert_eq!(run.manifest.ok, 100);
    assert!(run.is_complete());
    assert!(mock.max_in_flight() <= 4);
    let state = read_journal(&dir.path().join(JOURNAL_FILE)).unwrap();
    assert_eq!(state.lines, 100);
    for (id, e) in &state.entries {
        assert_eq!(e.raw_output.as_deref(), Some(gold[id].as_str()));
        assert_eq!(e.attempts, 1);
    }
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest, run.manifest);

    // complete journal: resume issues nothing
    let before = mock.total_requests();
    let again = resume_run(dir.path(), &endpoint(mock.base_url())).await.unwrap();
    assert_eq!(again.issued, 0);
    assert_eq!(mock.total_requests(), before);
}

#[tokio::test]
async fn fault_sequence_succeeds_on_third_attempt() {
    let (reqs, gold) = corpus(1);
    let script = MockScript {
        mode: MockMode::FaultSequence,
        faults: vec![429, 500, 200],
        ..Default::default()
    };
    let mock = serve(script, gold, 0).await.unwrap();
    let client = ChatClient::new(endpoint(mock.base_url())).unwrap();
    let body = client.request_body(&reqs[0].instruction, &reqs[0].input, Some(&reqs[0].record_id));
    let c = client.send(&body).await.unwrap();
    assert_eq!(c.attempts, 3);
    let statuses: Vec<u16> = mock.access_log().iter().map(|e| e.status).collect();
    assert_eq!(statuses, vec![429, 500, 200]);
}

#[tokio::test]
async fn retries_exhausted() {
    let mut overrides = BTreeMap::new();
    overrides.insert("d-000".to_string(), RecordOverride { always_status: Some(500), ..Default::default() });
    let (reqs, gold) = corpus(1);
    let mock = serve(MockScript { overrides, ..Default::default() }, gold, 0).await.unwrap();
    let mut ep = endpoint(mock.base_url());
    ep.max_retries = 2;
    let client = ChatClient::new(ep).unwrap();
    let body = client.request_body(&reqs[0].instruction, &reqs[0].input, Some("d-000"));
    match client.send(&body).await {
        Err(InferError::Endpoint { status: Some(500), attempts: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(mock.requests_for("d-000"), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let mut overrides = BTreeMap::new();
    overrides.insert("d-000".to_string(), RecordOverride { always_status: Some(400), ..Default::default() });
    let (_, gold) = corpus(1);
    let mock = serve(MockScript { overrides, ..Default::default() }, gold, 0).await.unwrap();
    let client = ChatClient::new(endpoint(mock.base_url())).unwrap();
    let body = client.request_body("i", "x", Some("d-000"));
    assert!(matches!(client.send(&body).await, Err(InferError::Endpoint { status: Some(400), attempts: 1, .. })));
}

#[tokio::test]
async fn permanent_failures_are_journaled_then_resumed() {
    let (reqs, gold) = corpus(100);
    let failing = ["d-007", "d-042", "d-099"];
    let overrides: BTreeMap<String, RecordOverride> = failing
        .iter()
        .map(|id| (id.to_string(), RecordOverride { always_status: Some(503), ..Default::default() }))
        .collect();
    let mock = serve(MockScript { overrides, ..Default::default() }, gold.clone(), 0).await.unwrap();
    let mut ep = endpoint(mock.base_url());
    ep.max_retries = 1;
    let dir = tempfile::tempdir().unwrap();
    let run = run_inference(reqs, &ep, dir.path()).await.unwrap();
    assert_eq!((run.manifest.ok, run.manifest.failed), (97, 3));
    assert_eq!(run.manifest.failed_ids, failing.map(String::from).to_vec());
    assert_eq!(run.state.entries["d-042"].status, EntryStatus::Failed);

    let healthy = serve(MockScript::default(), gold, 0).await.unwrap();
    let resumed = resume_run(dir.path(), &endpoint(healthy.base_url())).await.unwrap();
    assert_eq!(resumed.issued, 3);
    assert_eq!(healthy.total_requests(), 3);
    assert!(resumed.is_complete());
    assert_eq!(resumed.manifest.failed, 0);
}

#[tokio::test]
async fn resume_issues_only_pending_and_repairs_tail() {
    let (reqs, gold) = corpus(10);
    let mock = serve(MockScript::default(), gold, 0).await.unwrap();
    let ep = endpoint(mock.base_url());
    let dir = tempfile::tempdir().unwrap();
    run_inference(reqs, &ep, dir.path()).await.unwrap();

    // drop one entry and leave a torn write behind
    let path = dir.path().join(JOURNAL_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let removed: serde_json::Value = serde_json::from_str(lines.remove(4)).unwrap();
    let removed_id = removed["record_id"].as_str().unwrap().to_string();
    let mut f = std::fs::File::create(&path).unwrap();
    for l in &lines {
        writeln!(f, "{l}").unwrap();
    }
    write!(f, r#"{{"record_id": "{removed_id}", "status": "o"#).unwrap();
    drop(f);

    let before = mock.total_requests();
    let resumed = resume_run(dir.path(), &ep).await.unwrap();
    assert_eq!(resumed.issued, 1);
    assert_eq!(mock.total_requests() - before, 1);
    assert_eq!(mock.requests_for(&removed_id), 2);
    let state = read_journal(&path).unwrap();
    assert_eq!(state.lines, 10);
    assert!(resumed.is_complete());
}

#[tokio::test]
async fn concurrency_bound_respected() {
    let (reqs, gold) = corpus(40);
    let script = MockScript {
        latency: Latency { min_ms: 5, max_ms: 15 },
        ..Default::default()
    };
    let mock = serve(script, gold, 0).await.unwrap();
    for limit in [1, 3, 8] {
        let mut ep = endpoint(mock.base_url());
        ep.concurrency = limit;
        let dir = tempfile::tempdir().unwrap();
        run_inference(reqs.clone(), &ep, dir.path()).await.unwrap();
        assert!(mock.access_log().iter().all(|e| e.in_flight <= 8));
    }
    assert!(mock.max_in_flight() <= 8);

    let fresh = serve(MockScript { latency: Latency { min_ms: 5, max_ms: 15 }, ..Default::default() }, corpus(40).1, 0)
        .await
        .unwrap();
    let mut ep = endpoint(fresh.base_url());
    ep.concurrency = 3;
    run_inference(reqs, &ep, tempfile::tempdir().unwrap().path()).await.unwrap();
    assert!(fresh.max_in_flight() <= 3);
    assert!(fresh.max_in_flight() >= 2);
}

#[tokio::test]
async fn fixed_response_is_stored_verbatim() {
    let (reqs, _) = corpus(3);
    let script = MockScript {
        mode: MockMode::FixedResponse,
        fixed_response: Some("not json\r\n  ".into()),
        ..Default::default()
    };
    let mock = serve(script, HashMap::new(), 0).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_inference(reqs, &endpoint(mock.base_url()), dir.path()).await.unwrap();
    for e in run.state.entries.values() {
        assert_eq!(e.raw_output.as_deref(), Some("not json\r\n  "));
    }
}

#[tokio::test]
async fn timeout_reported() {
    let (reqs, gold) = corpus(1);
    let script = MockScript {
        latency: Latency { min_ms: 2500, max_ms: 2500 },
        ..Default::default()
    };
    let mock = serve(script, gold, 0).await.unwrap();
    let mut ep = endpoint(mock.base_url());
    ep.timeout_secs = 1;
    ep.max_retries = 0;
    let client = ChatClient::new(ep).unwrap();
    let body = client.request_body("i", "x", Some(&reqs[0].record_id));
    assert!(matches!(client.send(&body).await, Err(InferError::Timeout { attempts: 1 })));
}

#[tokio::test]
async fn run_dir_errors() {
    let (reqs, gold) = corpus(2);
    let mock = serve(MockScript::default(), gold, 0).await.unwrap();
    let ep = endpoint(mock.base_url());
    let dir = tempfile::tempdir().unwrap();

    assert!(matches!(resume_run(dir.path(), &ep).await, Err(InferError::NoJournal(_))));
    assert!(matches!(run_inference(vec![], &ep, dir.path()).await, Err(InferError::EmptyCorpus)));

    let lock = uie_infer::run::RunLock::acquire(dir.path()).unwrap();
    assert!(matches!(run_inference(reqs.clone(), &ep, dir.path()).await, Err(InferError::RunDirLocked(_))));
    drop(lock);

    run_inference(reqs.clone(), &ep, dir.path()).await.unwrap();
    let other = corpus(3).0;
    assert!(matches!(run_inference(other, &ep, dir.path()).await, Err(InferError::RunMismatch(_))));
    let dup = vec![reqs[0].clone(), reqs[0].clone()];
    assert!(matches!(run_inference(dup, &ep, dir.path()).await, Err(InferError::DuplicateRecord(_))));
}

#[tokio::test]
async fn port_in_use() {
    let (_, gold) = corpus(1);
    let first = serve(MockScript::default(), gold.clone(), 0).await.unwrap();
    let port = first.addr().port();
    assert!(matches!(serve(MockScript::default(), gold, port).await, Err(MockError::PortInUse(p)) if p == port));
    assert!(matches!(serve(MockScript::default(), HashMap::new(), 0).await, Err(MockError::MissingGoldIndex)));
}

#[tokio::test]
async fn bearer_token_from_env() {
    let mut ep = EndpointConfig::new("http://127.0.0.1:1", "m");
    ep.auth_env = Some("UIE_TEST_TOKEN_THAT_IS_UNSET".into());
    assert!(matches!(ChatClient::new(ep), Err(InferError::MissingToken(_))));
}

#[test]
fn script_loads_from_json() {
    let script: MockScript = serde_json::from_str(
        r#"{"mode": "fault_sequence", "faults": [429, 200], "overrides": {"a": {"response": "[]"}}, "latency": {"min_ms": 1, "max_ms": 2}}"#,
    )
    .unwrap();
    assert_eq!(script.mode, MockMode::FaultSequence);
    assert_eq!(script.overrides["a"].response.as_deref(), Some("[]"));
}
