mod common;

use std::path::Path;

use base64::Engine;
use common::gray_png;
use fer::server::{router, AppState, LoadedModel, ServiceConfig, MAX_BODY_BYTES};
use fer_core::model::ModelGraph;
use fer_core::{Arch, EmotionLabel, Split};
use reqwest::{Client, StatusCode};
use serde_json::Value;

fn loaded(seed: u64) -> LoadedModel {
    let m = ModelGraph::<f32>::build(Arch::FiveLayer, seed).unwrap();
    LoadedModel::from_weights_bytes(&fer::weights::to_bytes(&m, Default::default())).unwrap()
}

async fn spawn(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    format!("http://{addr}")
}

async fn with_model(data_root: Option<&Path>) -> String {
    let state = AppState::new(ServiceConfig {
        data_root: data_root.map(Path::to_path_buf),
        cors_origins: vec![],
    });
    state.set_model(loaded(11));
    spawn(state).await
}

fn face() -> Vec<u8> {
    gray_png(48, 48, |x, y| ((x * 3 + y * 2) % 256) as u8)
}

async fn post_png(client: &Client, url: &str, body: Vec<u8>) -> reqwest::Response {
    client.post(url).header("content-type", "image/png").body(body).send().await.unwrap()
}

fn probs(v: &Value) -> Vec<f64> {
    v["probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn predict_returns_distribution() {
    let base = with_model(None).await;
    let client = Client::new();
    let res = post_png(&client, &format!("{base}/predict"), face()).await;
    assert_eq!(res.status(), StatusCode::OK);
    let v: Value = res.json().await.unwrap();
    let p = probs(&v);
    assert_eq!(p.len(), 7);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    assert!(v["latency_ms"].as_f64().unwrap() >= 0.0);
    assert!(v["model_id"].as_str().unwrap().starts_with("five-layer-"));
    let label: EmotionLabel = v["label"].as_str().unwrap().parse().unwrap();
    let best = p.iter().cloned().enumerate().fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a }).0;
    assert_eq!(label.index(), best);
}

#[tokio::test(flavor = "multi_thread")]
async fn raw_pixels_match_png() {
    let base = with_model(None).await;
    let client = Client::new();
    let raw: Vec<u8> = (0..48 * 48).map(|i| ((i % 48) * 3 + (i / 48) * 2) as u8).collect();
    let a: Value = post_png(&client, &format!("{base}/predict"), face()).await.json().await.unwrap();
    let res = client
        .post(format!("{base}/predict"))
        .header("content-type", "application/octet-stream")
        .body(raw.clone())
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let b: Value = res.json().await.unwrap();
    assert_eq!(probs(&a), probs(&b));

    let short = client
        .post(format!("{base}/predict"))
        .header("content-type", "application/octet-stream")
        .body(raw[..100].to_vec())
        .send()
        .await
        .unwrap();
    assert_eq!(short.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn predict_rejections() {
    let base = with_model(None).await;
    let client = Client::new();
    let url = format!("{base}/predict");

    let res = post_png(&client, &url, gray_png(47, 48, |_, _| 0)).await;
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let v: Value = res.json().await.unwrap();
    assert_eq!(v["code"], "bad_dimensions");
    assert!(v["message"].as_str().unwrap().contains("expected 48x48"));

    let res = post_png(&client, &url, vec![0u8; MAX_BODY_BYTES + 1]).await;
    assert_eq!(res.status(), StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(res.json::<Value>().await.unwrap()["code"], "too_large");

    let res = post_png(&client, &url, b"definitely not a png".to_vec()).await;
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);

    let res = client.post(&url).header("content-type", "text/plain").body("hi").send().await.unwrap();
    assert_eq!(res.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);
    assert!(res.json::<Value>().await.unwrap()["message"].is_string());

    let res = client.get(&url).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::METHOD_NOT_ALLOWED);
    let res = client.get(format!("{base}/nowhere")).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
    assert_eq!(res.json::<Value>().await.unwrap()["code"], "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn tta_and_concurrency_are_deterministic() {
    let base = with_model(None).await;
    let client = Client::new();
    let tta_url = format!("{base}/predict?tta=1");
    let a: Value = post_png(&client, &tta_url, face()).await.json().await.unwrap();
    let b: Value = post_png(&client, &tta_url, face()).await.json().await.unwrap();
    assert_eq!(probs(&a), probs(&b));
    let plain: Value = post_png(&client, &format!("{base}/predict"), face()).await.json().await.unwrap();
    assert_ne!(probs(&a), probs(&plain));

    let url = format!("{base}/predict");
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let (client, url) = (client.clone(), url.clone());
            tokio::spawn(async move { post_png(&client, &url, face()).await.json::<Value>().await.unwrap() })
        })
        .collect();
    for t in tasks {
        assert_eq!(probs(&t.await.unwrap()), probs(&plain));
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn health_waits_for_model() {
    let state = AppState::new(ServiceConfig::default());
    let base = spawn(state.clone()).await;
    let client = Client::new();
    let res = client.get(format!("{base}/health")).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::SERVICE_UNAVAILABLE);
    let res = post_png(&client, &format!("{base}/predict"), face()).await;
    assert_eq!(res.status(), StatusCode::SERVICE_UNAVAILABLE);

    state.set_model(loaded(3));
    let v: Value = client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["param_count"], 2_438_311);
}

#[tokio::test(flavor = "multi_thread")]
async fn cors_header_present() {
    let base = with_model(None).await;
    let res = Client::new().get(format!("{base}/health")).header("origin", "http://example.test").send().await.unwrap();
    assert_eq!(res.headers()["access-control-allow-origin"], "*");
}

#[tokio::test(flavor = "multi_thread")]
async fn samples_json_and_multipart_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let base = with_model(Some(root.path())).await;
    let client = Client::new();
    let url = format!("{base}/samples");
    let before = fer::dataset::load_class_directories(root.path(), Split::Train).map(|l| l.dataset.class_counts()[3]).unwrap_or(0);

    let body = serde_json::json!({
        "label": "happy",
        "image": base64::engine::general_purpose::STANDARD.encode(face()),
    });
    let mut ids = Vec::new();
    for _ in 0..2 {
        let res = client.post(&url).json(&body).send().await.unwrap();
        assert_eq!(res.status(), StatusCode::CREATED);
        ids.push(res.json::<Value>().await.unwrap()["id"].as_str().unwrap().to_string());
    }
    let form = reqwest::multipart::Form::new()
        .text("label", "Happy")
        .part("image", reqwest::multipart::Part::bytes(face()).file_name("f.png"));
    let res = client.post(&url).multipart(form).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::CREATED);
    ids.push(res.json::<Value>().await.unwrap()["id"].as_str().unwrap().to_string());

    assert!(ids.iter().all(|id| id.starts_with("happy/")));
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 3);

    let load = fer::dataset::load_class_directories(root.path(), Split::Train).unwrap();
    assert_eq!(load.dataset.class_counts()[3], before + 3);
    let expected = fer::imageio::decode_png_gray(&face()).unwrap();
    assert!(load.dataset.samples().iter().all(|s| s.pixels() == expected.pixels()));
}

#[tokio::test(flavor = "multi_thread")]
async fn samples_rejections() {
    let root = tempfile::tempdir().unwrap();
    let base = with_model(Some(root.path())).await;
    let client = Client::new();
    let url = format!("{base}/samples");
    let img = base64::engine::general_purpose::STANDARD.encode(face());

    let res = client.post(&url).json(&serde_json::json!({"label": "joyful", "image": img})).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let v: Value = res.json().await.unwrap();
    assert_eq!(v["code"], "unknown_label");
    let msg = v["message"].as_str().unwrap();
    assert!(EmotionLabel::ALL.iter().all(|l| msg.contains(l.name())));

    let res = client.post(&url).json(&serde_json::json!({"label": "sad", "image": "%%%"})).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let small = base64::engine::general_purpose::STANDARD.encode(gray_png(10, 10, |_, _| 0));
    let res = client.post(&url).json(&serde_json::json!({"label": "sad", "image": small})).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let form = reqwest::multipart::Form::new().text("label", "sad");
    let res = client.post(&url).multipart(form).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    assert!(std::fs::read_dir(root.path()).unwrap().next().is_none());

    let disabled = with_model(None).await;
    let res = client.post(format!("{disabled}/samples")).json(&serde_json::json!({"label": "sad", "image": img})).send().await.unwrap();
    assert_eq!(res.status(), StatusCode::FORBIDDEN);
    assert_eq!(res.json::<Value>().await.unwrap()["code"], "disabled");
}
