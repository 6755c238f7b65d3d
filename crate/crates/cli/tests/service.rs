use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use blockid::identify::Identifier;
use blockid::model::posterior;
use blockid::synth::{generate_corpus, CorpusSpec};
use blockid::{default_lexicon, ModelParams};
use blockid_cli::service::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn identifier() -> Identifier {
    let lex = default_lexicon();
    let spec = CorpusSpec {
        replicas: 1,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec, &lex).unwrap();
    let beta = (0..lex.total_dim()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    Identifier::new(ModelParams::new(lex, beta).unwrap(), corpus).unwrap()
}

fn app() -> Router {
    router(identifier(), None)
}

async fn call(app: Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(path: &str) -> (StatusCode, Value) {
    let (s, b) = call(app(), Request::get(path).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn identify_raw(body: Value) -> (StatusCode, Vec<u8>) {
    let req = Request::post("/api/identify")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app(), req).await
}

#[tokio::test]
async fn lexicon_lists_fifteen_symbols_in_order() {
    let (s, v) = get("/api/lexicon").await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|x| x["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 15);
    assert_eq!(names[0], "left");
    assert!(names.contains(&"white"));
    let (_, again) = get("/api/lexicon").await;
    assert_eq!(v, again);
}

#[tokio::test]
async fn environments_list_and_detail() {
    let (s, v) = get("/api/environments").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 22);
    let (s, d) = get("/api/environments/3.2").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(d["category"], "3");
    let scene = d["scene"].as_array().unwrap();
    assert_eq!(scene.len(), d["object_ids"].as_array().unwrap().len());
    for b in scene {
        let (x, y, w, h) = (
            b["x"].as_f64().unwrap(),
            b["y"].as_f64().unwrap(),
            b["width"].as_f64().unwrap(),
            b["height"].as_f64().unwrap(),
        );
        assert!(x >= 0.0 && y >= 0.0 && x + w <= 1.0 && y + h <= 1.0);
    }
    let (s, e) = get("/api/environments/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["error"], "UnknownEnvironment");
}

#[tokio::test]
async fn empty_description_is_uniform() {
    let (s, b) = identify_raw(json!({"env_id": "5.1", "symbols": []})).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    let post = v["posterior"].as_array().unwrap();
    let n = post.len() as f64;
    for o in post {
        assert!((o["prob"].as_f64().unwrap() - 1.0 / n).abs() < 1e-12);
    }
    assert!((v["entropy"].as_f64().unwrap() - n.ln()).abs() < 1e-12);
}

#[tokio::test]
async fn identify_matches_library_posterior() {
    let id = identifier();
    for (env_id, desc) in [("1.1", "left"), ("4.3", "green big"), ("5.2", "white top small"), ("2.2", "tall")] {
        let tokens: Vec<&str> = desc.split(' ').collect();
        let (s, b) = identify_raw(json!({"env_id": env_id, "symbols": tokens})).await;
        assert_eq!(s, StatusCode::OK);
        let v: Value = serde_json::from_slice(&b).unwrap();
        let env = id.env(env_id).unwrap();
        let d = id.lexicon().parse_description(&tokens).unwrap();
        let lib = posterior(&d, env, &id.params).unwrap();
        let rows = v["posterior"].as_array().unwrap();
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        for r in rows {
            let p = r["prob"].as_f64().unwrap();
            let o = env.object_index(r["object_id"].as_str().unwrap()).unwrap();
            assert!((p - lib.probs[o]).abs() <= 1e-12);
            assert!(p <= prev);
            prev = p;
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-9);
        let (_, again) = identify_raw(json!({"env_id": env_id, "symbols": tokens})).await;
        assert_eq!(b, again);
    }
}

#[tokio::test]
async fn identify_errors() {
    let (s, b) = identify_raw(json!({"env_id": "nope", "symbols": ["left"]})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["error"], "UnknownEnvironment");
    let (s, b) = identify_raw(json!({"env_id": "1.1", "symbols": ["left", "mauve"]})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["token"], "mauve");
}

#[tokio::test]
async fn cors_headers_present() {
    let req = Request::get("/api/lexicon")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app().oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn serves_static_console() {
    let dir = tempfile::TempDir::new().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>console</html>").unwrap();
    let app = router(identifier(), Some(dir.path()));
    let (s, b) = call(app.clone(), Request::get("/index.html").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b, b"<html>console</html>");
    let (s, _) = call(app, Request::get("/api/lexicon").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn console_and_service_agree() {
    let id = identifier();
    let probes = ["left", "", "red big", "white", "top thin short", "blue right"];
    for env_id in ["1.3", "3.1", "5.1"] {
        let input = probes.join("\n");
        let mut out = Vec::new();
        blockid_cli::repl::run(&id, env_id, true, std::io::Cursor::new(input), &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines.len(), probes.len());
        for (probe, line) in probes.iter().zip(lines) {
            let (s, body) = identify_raw(json!({"env_id": env_id, "symbols": probe.split_whitespace().collect::<Vec<_>>()})).await;
            assert_eq!(s, StatusCode::OK);
            assert_eq!(line.as_bytes(), &body[..], "{env_id} / {probe}");
        }
    }
}
