use std::net::SocketAddr;

use serde_json::{json, Value};

async fn start() -> String {
    let (addr, _handle): (SocketAddr, _) = provisim_service::spawn(([127, 0, 0, 1], 0).into())
        .await
        .expect("bind");
    format!("http://{addr}")
}

async fn post(base: &str, path: &str, body: Value) -> (u16, Value) {
    let resp = reqwest::Client::new()
        .post(format!("{base}{path}"))
        .json(&body)
        .send()
        .await
        .expect("send");
    let status = resp.status().as_u16();
    let text = resp.text().await.expect("body");
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

async fn get(base: &str, path: &str) -> (u16, Value) {
    let resp = reqwest::get(format!("{base}{path}")).await.expect("send");
    let status = resp.status().as_u16();
    let text = resp.text().await.expect("body");
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reports_ok() {
    let base = start().await;
    let (status, body) = get(&base, "/healthz").await;
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn run_returns_all_files() {
    let base = start().await;
    let (status, body) = post(&base, "/v1/run", json!({ "overrides": ["run.steps=30"] })).await;
    assert_eq!(status, 200, "{body}");
    let files = body["files"].as_object().unwrap();
    for name in ["trace.csv", "metrics.csv", "timeline.svg"] {
        assert!(files.contains_key(name), "missing {name}");
    }
    let metrics = files["metrics.csv"].as_str().unwrap();
    assert!(metrics.starts_with("CR,avg_vm1_cpu,avg_vm2_cpu,AmRT,SLOO\n"));
    assert!(body["metrics"]["completed_requests"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn parse_errors_carry_the_line() {
    let base = start().await;
    let scenario = "controller.filter = hinf\n# comment\nbogus.key = 1\n";
    let (status, body) = post(&base, "/v1/run", json!({ "scenario": scenario })).await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "parse");
    assert_eq!(body["line"], 3);
}

#[tokio::test]
async fn malformed_json_is_a_bad_request() {
    let base = start().await;
    let resp = reqwest::Client::new()
        .post(format!("{base}/v1/run"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
}

#[tokio::test]
async fn sweep_rejects_unknown_parameter() {
    let base = start().await;
    let (status, body) = post(
        &base,
        "/v1/sweep",
        json!({ "parameter": "zeta", "values": [1.0] }),
    )
    .await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "usage");
}

#[tokio::test]
async fn sweep_over_c_gives_one_row_per_value() {
    let base = start().await;
    let (status, body) = post(
        &base,
        "/v1/sweep",
        json!({ "overrides": ["run.steps=30"], "parameter": "c", "values": [0.6, 0.8] }),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["rows"].as_array().unwrap().len(), 2);
    let csv = body["files"]["sweep.csv"].as_str().unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[tokio::test]
async fn compare_defaults_to_all_controllers() {
    let base = start().await;
    let (status, body) = post(&base, "/v1/compare", json!({ "overrides": ["run.steps=30"] })).await;
    assert_eq!(status, 200, "{body}");
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["workload_seed"] == rows[0]["workload_seed"]));
}

#[tokio::test]
async fn replay_names_missing_column() {
    let base = start().await;
    let trace = "k,component,demand,usage,allocation,backlog,mrt,cr\n0,0,1,1,1,0,0.1,1\n";
    let (status, body) = post(&base, "/v1/replay", json!({ "trace": trace })).await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "schema");
    assert!(body["message"].as_str().unwrap().contains("observation"));
}

#[tokio::test]
async fn loop_lifecycle() {
    let base = start().await;
    let (status, created) = post(
        &base,
        "/v1/loops",
        json!({ "scenario": "controller.filter = kalman\ncontroller.T = 3\n" }),
    )
    .await;
    assert_eq!(status, 201, "{created}");
    let id = created["id"].as_u64().unwrap();
    assert_eq!(created["components"], 2);

    for y in [[40.0, 20.0], [42.0, 21.0], [41.0, 19.5], [45.0, 22.0]] {
        let (status, body) = post(&base, &format!("/v1/loops/{id}/observe"), json!({ "observation": y })).await;
        assert_eq!(status, 200, "{body}");
        assert_eq!(body["decision"]["allocation"].as_array().unwrap().len(), 2);
    }
    let (status, body) = post(
        &base,
        &format!("/v1/loops/{id}/observe"),
        json!({ "samples": [[40.0, 20.0], [44.0, 22.0]] }),
    )
    .await;
    assert_eq!(status, 200, "{body}");

    let (_, st) = get(&base, &format!("/v1/loops/{id}")).await;
    assert_eq!(st["telemetry"]["steps"], 5);

    let (status, body) = post(&base, &format!("/v1/loops/{id}/observe"), json!({ "observation": [1.0] })).await;
    assert_eq!(status, 422);
    assert_eq!(body["error"], "input");

    let (status, st) = post(&base, &format!("/v1/loops/{id}/reset"), json!(null)).await;
    assert_eq!(status, 200);
    assert_eq!(st["telemetry"]["steps"], 0);

    let client = reqwest::Client::new();
    let del = client.delete(format!("{base}/v1/loops/{id}")).send().await.unwrap();
    assert_eq!(del.status().as_u16(), 204);
    let again = client.delete(format!("{base}/v1/loops/{id}")).send().await.unwrap();
    assert_eq!(again.status().as_u16(), 404);
    let (status, body) = get(&base, &format!("/v1/loops/{id}")).await;
    assert_eq!(status, 404);
    assert_eq!(body["error"], "not_found");
}

#[tokio::test]
async fn loop_rejects_bad_dimension() {
    let base = start().await;
    let (status, _) = post(&base, "/v1/loops", json!({ "components": 0 })).await;
    assert_eq!(status, 400);
}

#[tokio::test]
async fn unknown_route_is_not_found() {
    let base = start().await;
    let (status, body) = get(&base, "/v2/nothing").await;
    assert_eq!(status, 404);
    assert_eq!(body["error"], "not_found");
}
