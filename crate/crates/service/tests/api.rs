use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use ratqual_core::assessment::{
    AggregationWeights, AssessmentInput, CompatibilityMatrix, MaturityLevel, OperationalRates,
    OrgMaturity,
};
use ratqual_core::monitoring::{export_csv, trend_report, SnapshotStore};
use ratqual_core::scope::{AppService, CollaborationScope, Organization, SubProcess};
use ratqual_core::taxonomy::CharacteristicId;
use ratqual_service::{router, ApiError, ErrorCode};
use serde_json::{json, Value};
use tower::ServiceExt;

const C: CharacteristicId = CharacteristicId::InterAlignmentAbility;

struct Api {
    app: Router,
    home: tempfile::TempDir,
}

struct Reply {
    status: StatusCode,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&self.body))
        })
    }

    fn error(&self) -> ApiError {
        serde_json::from_slice(&self.body).expect("error body")
    }

    fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

impl Api {
    fn new() -> Self {
        let home = tempfile::tempdir().unwrap();
        Api { app: router(home.path()), home }
    }

    async fn send(&self, method: Method, uri: &str, body: Option<Value>, accept: Option<&str>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(a) = accept {
            req = req.header(header::ACCEPT, a);
        }
        let req = match body {
            Some(b) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, content_type, body }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, None).await
    }

    async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(body), None).await
    }

    async fn put(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::PUT, uri, Some(body), None).await
    }
}

fn input(levels: [i64; 2], ds: f64) -> AssessmentInput {
    AssessmentInput {
        characteristic: C,
        org_maturities: ["org-a", "org-b"]
            .iter()
            .zip(levels)
            .map(|(o, l)| OrgMaturity {
                org_id: o.to_string(),
                characteristic: C,
                qmml: MaturityLevel::new(l).unwrap(),
            })
            .collect(),
        matrix: CompatibilityMatrix::compatible(),
        rates: OperationalRates::new(ds, 0.9, 0.8).unwrap(),
        weights: AggregationWeights::EQUAL,
    }
}

fn scope() -> CollaborationScope {
    let mut s = CollaborationScope::new("acme", "ACME supply chain", Utc.with_ymd_and_hms(2026, 3, 1, 9, 0, 0).unwrap());
    s.organizations = ["org-a", "org-b"]
        .iter()
        .map(|o| Organization { org_id: o.to_string(), name: o.to_uppercase() })
        .collect();
    s.sub_processes = vec![
        SubProcess { process_id: "p1".into(), owner_org: "org-a".into(), name: "Order".into() },
        SubProcess { process_id: "p2".into(), owner_org: "org-b".into(), name: "Ship".into() },
    ];
    s.app_services = vec![AppService { service_id: "s1".into(), from: "p1".into(), to: "p2".into(), name: "notify".into() }];
    s.set_assessment(&input([2, 4], 0.5));
    s
}

async fn with_scope() -> Api {
    let api = Api::new();
    let r = api.post("/api/v1/scopes", serde_json::to_value(scope()).unwrap()).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    api
}

const BASE: &str = "/api/v1/scopes/acme/characteristics/inter-alignment-ability";

#[tokio::test]
async fn catalog_lists_every_characteristic() {
    let api = Api::new();
    let r = api.get("/api/v1/catalog").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["characteristics"].as_array().unwrap().len(), 17);
}

#[tokio::test]
async fn create_then_read_returns_the_same_document() {
    let api = with_scope().await;
    let r = api.get("/api/v1/scopes/acme").await;
    assert_eq!(r.status, StatusCode::OK);
    let back: CollaborationScope = serde_json::from_slice(&r.body).unwrap();
    assert_eq!(back, scope());

    let list = api.get("/api/v1/scopes").await.json();
    assert_eq!(list[0]["scope_id"], "acme");
    assert_eq!(list[0]["revision"], 1);

    let again = api.post("/api/v1/scopes", serde_json::to_value(scope()).unwrap()).await;
    assert_eq!(again.status, StatusCode::CONFLICT);
    assert_eq!(again.error().code, ErrorCode::Conflict);
}

#[tokio::test]
async fn updates_validate_and_compare_revisions() {
    let api = with_scope().await;
    let mut doc = scope();
    doc.name = "renamed".into();
    let ok = api.put("/api/v1/scopes/acme", serde_json::to_value(&doc).unwrap()).await;
    assert_eq!(ok.status, StatusCode::OK, "{}", ok.text());
    assert_eq!(ok.json()["revision"], 2);

    // Same revision again is now stale.
    let stale = api.put("/api/v1/scopes/acme", serde_json::to_value(&doc).unwrap()).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);

    let mut dangling = doc.clone();
    dangling.revision = 2;
    dangling.app_services[0].to = "p9".into();
    let bad = api.put("/api/v1/scopes/acme", serde_json::to_value(&dangling).unwrap()).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    let err = bad.error();
    assert_eq!(err.code, ErrorCode::Validation);
    let violations = &err.details.unwrap()["violations"];
    assert!(violations.to_string().contains("app_services[0].to"), "{violations}");

    assert_eq!(api.get("/api/v1/scopes/acme").await.json()["name"], "renamed");
}

#[tokio::test]
async fn unknown_scope_is_not_found() {
    let api = Api::new();
    for r in [
        api.get("/api/v1/scopes/nope").await,
        api.post("/api/v1/scopes/nope/characteristics/security/assess", json!({})).await,
        api.get("/api/v1/scopes/nope/characteristics/security/timeline").await,
        api.put("/api/v1/scopes/nope", serde_json::to_value(scope()).unwrap()).await,
        api.get("/api/v1/elsewhere").await,
    ] {
        assert_eq!(r.status, StatusCode::NOT_FOUND);
        assert_eq!(r.error().code, ErrorCode::NotFound);
    }
}

#[tokio::test]
async fn assess_uses_the_stored_input_and_is_pure() {
    let api = with_scope().await;
    let first = api.post(&format!("{BASE}/assess"), json!({})).await;
    assert_eq!(first.status, StatusCode::OK, "{}", first.text());
    let body = first.json();
    let expected = ratqual_core::assessment::assess(&input([2, 4], 0.5)).unwrap();
    assert_eq!(body["result"]["qp"], 0.4);
    assert_eq!(body["result"]["ratqual"].as_f64().unwrap(), expected.ratqual);
    assert_eq!(body["input"]["rates"]["ds"], 0.5);
    assert!(body.get("snapshot").is_none());

    let second = api.send(Method::POST, &format!("{BASE}/assess"), None, None).await;
    assert_eq!(second.body, first.body);
    assert!(!api.home.path().join("snapshots").exists());
}

#[tokio::test]
async fn assess_accepts_a_working_copy() {
    let api = with_scope().await;
    let working = input([5, 5], 1.0);
    let r = api.post(&format!("{BASE}/assess"), json!({ "input": working })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let expected = ratqual_core::assessment::assess(&working).unwrap();
    assert_eq!(r.json()["result"]["ratqual"].as_f64().unwrap(), expected.ratqual);
    assert_eq!(r.json()["result"]["qp"], 1.0);

    let mut stranger = input([3, 3], 0.5);
    stranger.org_maturities[1].org_id = "org-z".into();
    let r = api.post(&format!("{BASE}/assess"), json!({ "input": stranger })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.error().message.contains("org-z"));

    let mut out_of_range = serde_json::to_value(input([3, 3], 0.5)).unwrap();
    out_of_range["rates"]["ts"] = json!(1.5);
    let r = api.post(&format!("{BASE}/assess"), json!({ "input": out_of_range })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_characteristic_names_the_token() {
    let api = with_scope().await;
    let r = api.post("/api/v1/scopes/acme/characteristics/telepathy/assess", json!({})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let err = r.error();
    assert_eq!(err.code, ErrorCode::Validation);
    assert!(err.message.contains("telepathy"), "{}", err.message);
}

#[tokio::test]
async fn missing_stored_assessment_names_the_field() {
    let api = with_scope().await;
    let r = api.post("/api/v1/scopes/acme/characteristics/security/assess", json!({})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.error().message.contains("assessments.Security"), "{}", r.error().message);
}

#[tokio::test]
async fn recorded_assessments_appear_on_the_timeline() {
    let api = with_scope().await;
    let empty = api.get(&format!("{BASE}/timeline")).await;
    assert_eq!(empty.status, StatusCode::OK);
    assert_eq!(empty.json()["series"], json!([]));

    let t1 = "2026-03-02T10:00:00Z";
    let t2 = "2026-03-03T10:00:00Z";
    let r = api.post(&format!("{BASE}/assess?record=true"), json!({ "taken_at": t1, "label": "as-is" })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert_eq!(r.json()["snapshot"]["label"], "as-is");
    let tl = api.get(&format!("{BASE}/timeline")).await.json();
    assert_eq!(tl["series"].as_array().unwrap().len(), 1);

    let better = input([3, 4], 0.9);
    let r = api.post(&format!("{BASE}/assess?record=true"), json!({ "taken_at": t2, "input": better })).await;
    assert_eq!(r.status, StatusCode::OK);
    let replay = api.post(&format!("{BASE}/assess?record=true"), json!({ "taken_at": t2 })).await;
    assert_eq!(replay.status, StatusCode::CONFLICT);

    let tl = api.get(&format!("{BASE}/timeline")).await.json();
    let series = tl["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert!(series[0]["ratqual"].as_f64() < series[1]["ratqual"].as_f64());
    assert_eq!(tl["flags"], json!([]));

    let windowed = api.get(&format!("{BASE}/timeline?from=2026-03-03T00:00:00Z")).await.json();
    assert_eq!(windowed["series"].as_array().unwrap().len(), 1);
    let bad_window = api.get(&format!("{BASE}/timeline?from={t2}&to={t1}")).await;
    assert_eq!(bad_window.status, StatusCode::BAD_REQUEST);

    // CSV through either negotiation route matches the library export byte for byte.
    let store = SnapshotStore::for_scope(api.home.path(), "acme");
    let direct = export_csv(&trend_report(&store, "acme", C, None, None).unwrap());
    let by_accept = api.send(Method::GET, &format!("{BASE}/timeline"), None, Some("text/csv")).await;
    assert!(by_accept.content_type.starts_with("text/csv"));
    assert_eq!(by_accept.text(), direct);
    let by_query = api.get(&format!("{BASE}/timeline?format=csv")).await;
    assert_eq!(by_query.text(), direct);
    assert_eq!(direct.lines().count(), 3);
}

#[tokio::test]
async fn plans_are_sound_and_explained() {
    let api = with_scope().await;
    let r = api.post(&format!("{BASE}/plan"), json!({ "target": 0.8 })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let body = r.json();
    assert!(body["scenario"]["projected"]["ratqual"].as_f64().unwrap() >= 0.8);
    let steps = body["scenario"]["steps"].as_array().unwrap().len();
    assert!(steps > 0);
    assert_eq!(body["explanation"].as_array().unwrap().len(), steps);

    let again = api.post(&format!("{BASE}/plan"), json!({ "target": 0.8 })).await;
    assert_eq!(again.body, r.body);

    let easy = api.post(&format!("{BASE}/plan"), json!({ "target": 0.1 })).await.json();
    assert_eq!(easy["scenario"]["steps"], json!([]));
    assert_eq!(easy["scenario"]["total_cost"], 0.0);

    let costs = json!({ "rate_step": 0.25, "maturity_step_cost": 100.0 });
    let priced = api.post(&format!("{BASE}/plan"), json!({ "target": 0.79, "costs": costs })).await.json();
    assert!(priced["scenario"]["steps"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["action"]["kind"] != "RaiseMaturity"));

    let too_high = api.post(&format!("{BASE}/plan"), json!({ "target": 1.1 })).await;
    assert_eq!(too_high.status, StatusCode::BAD_REQUEST);
    assert_eq!(too_high.error().code, ErrorCode::Validation);

    let bad_costs = api.post(&format!("{BASE}/plan"), json!({ "target": 0.9, "costs": { "rate_step": 0.3 } })).await;
    assert_eq!(bad_costs.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_bodies_are_validation_errors() {
    let api = with_scope().await;
    let r = api
        .send(Method::POST, &format!("{BASE}/plan"), None, None)
        .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = api.post("/api/v1/scopes", json!({ "scope_id": "x" })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = api.send(Method::DELETE, "/api/v1/scopes/acme", None, None).await;
    assert_eq!(r.status, StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(r.error().code, ErrorCode::Validation);
}
