use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use nextstep_core::evaluator::evaluate;
use nextstep_core::ingest::filter_trajectories;
use nextstep_core::synthgen::{generate, synthetic_taxonomies, GenParams};
use nextstep_core::{ConceptId, Method, ScoreParams, StepKind, Taxonomies};
use nextstep_service::{router, AppState, Snapshot, PAGE_SIZE};

fn corpus() -> (Taxonomies, Vec<nextstep_core::Trajectory>) {
    let params = GenParams {
        seed: 5,
        n_users: 600,
        ..GenParams::default()
    };
    let tax = synthetic_taxonomies(&params).unwrap();
    let (corpus, _) = filter_trajectories(generate(&params).unwrap());
    (tax, corpus)
}

fn trained() -> AppState {
    let (tax, corpus) = corpus();
    AppState::new(Snapshot::trained(tax, corpus).unwrap())
}

fn untrained() -> AppState {
    AppState::new(Snapshot::untrained(Taxonomies::builtin()))
}

async fn call(state: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn bachelor_cs(branch: &str, page: usize) -> Value {
    json!({
        "current_step": {"kind": "diploma", "title": "Bachelor in CS", "concepts": ["diploma:1"]},
        "branch": branch,
        "page": page,
    })
}

#[tokio::test]
async fn concepts_listing() {
    let state = untrained();
    let (s, v) = call(&state, "GET", "/api/v1/concepts?domain=job", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 47);
    let (_, v) = call(&state, "GET", "/api/v1/concepts?domain=diploma", None).await;
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 17);
    assert_eq!(list[1], json!({"id": "diploma:1", "label": "CS & Internet"}));
    let (s, v) = call(&state, "GET", "/api/v1/concepts?domain=x", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_domain");
    assert!(v["error"]["message"].is_string());
}

#[tokio::test]
async fn first_page_has_six_concepts() {
    let state = trained();
    let (s, v) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("further_studies", 0))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["top_concepts"].as_array().unwrap().len(), PAGE_SIZE);
    assert_eq!(v["more_available"], true);
    assert_eq!(v["total"], 17);
    assert_eq!(v["context_step"]["concepts"][0]["label"], "CS & Internet");
    let counts: Vec<u64> = v["top_concepts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["count"].as_u64().unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    let shares: f64 = v["branches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["share"].as_f64().unwrap())
        .sum();
    assert!((shares - 1.0).abs() < 1e-12);
}

#[tokio::test]
async fn pages_concatenate_to_the_full_ranking() {
    let state = trained();
    let snap = state.snapshot.current();
    let t = snap.trained.as_ref().unwrap();
    let ctx = [ConceptId::new(StepKind::Diploma, 1)];
    let full: Vec<String> = t
        .job
        .previous
        .rank(Some(&ctx), &snap.taxonomies.job)
        .concepts()
        .map(|c| c.to_string())
        .collect();
    let mut seen = Vec::new();
    let mut page = 0;
    loop {
        let (s, v) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("job", page))).await;
        assert_eq!(s, StatusCode::OK);
        let items = v["top_concepts"].as_array().unwrap();
        seen.extend(items.iter().map(|c| c["id"].as_str().unwrap().to_string()));
        if v["more_available"] == false {
            break;
        }
        assert_eq!(items.len(), PAGE_SIZE);
        page += 1;
    }
    assert_eq!(seen, full);
    assert_eq!(page, 47 / PAGE_SIZE);
    let (_, v) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("job", 99))).await;
    assert_eq!(v["top_concepts"], json!([]));
    assert_eq!(v["more_available"], false);
}

#[tokio::test]
async fn goal_reorders_only_with_evidence() {
    let state = trained();
    let snap = state.snapshot.current();
    let t = snap.trained.as_ref().unwrap();
    let ids = |v: &Value| -> Vec<String> {
        v["top_concepts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["id"].as_str().unwrap().to_string())
            .collect()
    };
    let all_pages = |goal: Option<&str>| {
        let state = state.clone();
        let goal = goal.map(str::to_string);
        async move {
            let mut out = Vec::new();
            for page in 0..3 {
                let mut body = bachelor_cs("further_studies", page);
                if let Some(g) = &goal {
                    body["goal"] = json!(g);
                }
                let (s, v) = call(&state, "POST", "/api/v1/options", Some(body)).await;
                assert_eq!(s, StatusCode::OK, "{v}");
                out.extend(ids(&v));
            }
            out
        }
    };
    let plain = all_pages(None).await;
    let env = snap.taxonomies.diploma.id_by_label("Environment & Energy").unwrap();
    let with_goal = all_pages(Some(&env.to_string())).await;
    let evidence: u64 = snap.taxonomies.diploma.ids().map(|h| t.diploma.next.joint(h, env)).sum();
    assert!(evidence > 0);
    assert_ne!(plain, with_goal);

    // a goal no training step ever preceded adds nothing
    let quiet = snap
        .taxonomies
        .job
        .ids()
        .find(|&g| snap.taxonomies.diploma.ids().all(|h| t.diploma.next.joint(h, g) == 0));
    if let Some(g) = quiet {
        assert_eq!(plain, all_pages(Some(&g.to_string())).await);
    }
}

#[tokio::test]
async fn identical_requests_give_identical_bodies() {
    let state = trained();
    let body = bachelor_cs("job", 1);
    let a = call(&state, "POST", "/api/v1/options", Some(body.clone())).await;
    let b = call(&state, "POST", "/api/v1/options", Some(body)).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn options_errors() {
    let state = trained();
    let bad = json!({"current_step": {"kind": "diploma", "concepts": ["diploma:99"]}, "branch": "job"});
    let (s, v) = call(&state, "POST", "/api/v1/options", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_concept");
    let wrong_kind = json!({"current_step": {"kind": "diploma", "concepts": ["job:3"]}, "branch": "job"});
    let (s, _) = call(&state, "POST", "/api/v1/options", Some(wrong_kind)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let bad_goal = json!({"current_step": {"kind": "job", "concepts": ["job:3"]}, "branch": "job", "goal": "nope"});
    let (s, v) = call(&state, "POST", "/api/v1/options", Some(bad_goal)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_concept");
    let (s, v) = call(&state, "POST", "/api/v1/options", Some(json!({"branch": "job"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_request");

    let (s, v) = call(&untrained(), "POST", "/api/v1/options", Some(bachelor_cs("job", 0))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "model_not_trained");
}

#[tokio::test]
async fn fields_classify_the_current_step() {
    let state = trained();
    let by_fields = json!({
        "current_step": {"kind": "diploma", "fields": ["cs-and-internet"]},
        "branch": "job",
    });
    let (s, a) = call(&state, "POST", "/api/v1/options", Some(by_fields)).await;
    assert_eq!(s, StatusCode::OK, "{a}");
    let (_, b) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("job", 0))).await;
    assert_eq!(a["top_concepts"], b["top_concepts"]);
}

async fn wait_for(state: &AppState, id: &str) -> Value {
    for _ in 0..600 {
        let (s, v) = call(state, "GET", &format!("/api/v1/evaluate/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if v["status"] != "running" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("evaluation job {id} did not finish");
}

#[tokio::test]
async fn evaluation_job_matches_library() {
    let state = trained();
    let req = json!({"target_kind": "job", "method": "previous"});
    let (s, v) = call(&state, "POST", "/api/v1/evaluate", Some(req)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let id = v["id"].as_str().unwrap().to_string();
    let done = wait_for(&state, &id).await;
    assert_eq!(done["status"], "done");
    assert_eq!(done["id"], json!(id));

    let (tax, corpus) = corpus();
    let want = evaluate(&corpus, &tax.job, Method::PreviousStep, &ScoreParams::default(), 1).unwrap();
    assert_eq!(done["report"], serde_json::to_value(&want).unwrap());
}

#[tokio::test]
async fn evaluation_errors() {
    let state = trained();
    let (s, _) = call(&state, "GET", "/api/v1/evaluate/12345", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&state, "GET", "/api/v1/evaluate/abc", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let bad = json!({"target_kind": "job", "method": "previous", "params": {"alpha": 0.2, "pack_size": 6, "pack_penalty": 0.99}});
    let (s, v) = call(&state, "POST", "/api/v1/evaluate", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_params");
    let (s, _) = call(&state, "POST", "/api/v1/evaluate", Some(json!({"target_kind": "job", "method": "oracle"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&untrained(), "POST", "/api/v1/evaluate", Some(json!({"target_kind": "job", "method": "previous"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn reload_swaps_the_snapshot() {
    let state = untrained();
    let (s, _) = call(&state, "POST", "/api/v1/reload", None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let dir = std::env::temp_dir().join(format!("nextstep-reload-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corpus.jsonl");
    let (_, corpus) = corpus();
    let mut buf = Vec::new();
    nextstep_core::ingest::write_corpus_jsonl(&corpus, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();

    let mut config = nextstep_service::ServiceConfig::default();
    let mut state = AppState::from_config(config.clone()).unwrap();
    let (s, _) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("job", 0))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    config.corpus = Some(path);
    state.config = Some(config);
    let (s, v) = call(&state, "POST", "/api/v1/reload", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["users"], corpus.len());
    let (s, _) = call(&state, "POST", "/api/v1/options", Some(bachelor_cs("job", 0))).await;
    assert_eq!(s, StatusCode::OK);
    let (_, h) = call(&state, "GET", "/api/v1/health", None).await;
    assert_eq!(h["trained"], true);
    std::fs::remove_dir_all(dir).unwrap();
}

#[tokio::test]
async fn unknown_routes_use_the_error_shape() {
    let (s, v) = call(&untrained(), "GET", "/api/v2/nothing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not_found");
}
