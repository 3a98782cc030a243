use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::Value;
use sevenseg::classifiers::{train_forest, Dataset, Model, TrainParams};
use sevenseg::datagen::{render_number, RenderStyle};
use sevenseg::imaging::{box_blur, io, to_feature_vector, Raster, SegmentParams, FEATURE_DIM};
use sevenseg::pipeline::{extract_digits, recognize_bytes, RecognizeOptions};
use sevenseg::GrayImage;
use sevenseg_service::{router, AppState, ReadingStore};
use tower::ServiceExt;

const BOUNDARY: &str = "XtestBoundaryX";

fn model() -> &'static Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for thickness in [3, 4, 5] {
            let style = RenderStyle {
                thickness,
                ..RenderStyle::default()
            };
            for d in 0..10u8 {
                let img = render_number(&d.to_string(), &style).unwrap();
                features.extend(to_feature_vector(
                    &extract_digits(&img, &SegmentParams::default()).unwrap()[0].1,
                ));
                labels.push(d);
            }
        }
        let data = Dataset::new(FEATURE_DIM, features, labels).unwrap();
        Model::Forest(
            train_forest(
                &data,
                &TrainParams {
                    n_trees: 25,
                    seed: 3,
                    ..TrainParams::default()
                },
            )
            .unwrap(),
        )
    })
}

fn app_with(
    dir: &std::path::Path,
    options: RecognizeOptions,
    max_upload: usize,
) -> (Router, AppState) {
    let store = ReadingStore::open(&dir.join("readings.jsonl")).unwrap();
    let state = AppState::new(model().clone(), options, store, max_upload);
    (router(state.clone(), None), state)
}

fn app(dir: &std::path::Path) -> Router {
    app_with(dir, RecognizeOptions::default(), 5 * 1024 * 1024).0
}

fn multipart(parts: &[(&str, &[u8])]) -> Request<Body> {
    let mut body = Vec::new();
    for (name, data) in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        if *name == "image" {
            body.extend_from_slice(b"Content-Disposition: form-data; name=\"image\"; filename=\"x.png\"\r\nContent-Type: application/octet-stream\r\n\r\n");
        } else {
            body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes(),
            );
        }
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/v1/recognize")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

fn json_post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn png(text: &str) -> Vec<u8> {
    io::encode_png(&render_number(text, &RenderStyle::default()).unwrap())
}

#[tokio::test]
async fn health() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = send(
        &app(dir.path()),
        Request::get("/v1/health").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        serde_json::json!({"status": "ok", "model_loaded": true})
    );
}

#[tokio::test]
async fn recognizes_render_and_matches_library_path() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let img = png("120");
    let (status, body) = send(&app, multipart(&[("image", &img), ("type", b"systolic")])).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["digits"], "120");
    assert_eq!(body["per_digit"].as_array().unwrap().len(), 3);
    assert_eq!(body["boxes"].as_array().unwrap().len(), 3);
    assert_eq!(body["per_digit"][0]["char"], "1");
    assert!(body["blur_score"].as_f64().unwrap() > 0.0);

    let direct = recognize_bytes(model(), &img, &RecognizeOptions::default()).unwrap();
    assert_eq!(body, serde_json::to_value(&direct).unwrap());
}

#[tokio::test]
async fn server_side_crop() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let img = render_number("47", &RenderStyle::default()).unwrap();
    let bytes = io::encode_png(&img);
    let b = format!("46,0,{},{}", img.width() - 46, img.height());
    let (status, body) = send(
        &app,
        multipart(&[
            ("image", &bytes),
            ("type", b"pulse"),
            ("bounds", b.as_bytes()),
        ]),
    )
    .await;
    assert_eq!(
        (status, body["digits"].as_str()),
        (StatusCode::OK, Some("7"))
    );

    for bad in ["1,2,3", "a,b,c,d", "0,0,0,5", "0,0,9999,5"] {
        let (status, body) = send(
            &app,
            multipart(&[
                ("image", &bytes),
                ("type", b"pulse"),
                ("bounds", bad.as_bytes()),
            ]),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(body["error"], "malformed_bounds");
    }
}

#[tokio::test]
async fn recognize_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let white = io::encode_png(&GrayImage::filled(80, 40, 255).unwrap());
    let (status, body) = send(&app, multipart(&[("image", &white), ("type", b"glucose")])).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("no_digits_found"))
    );

    let (status, body) = send(
        &app,
        multipart(&[("image", b"GIF89a....."), ("type", b"glucose")]),
    )
    .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            Some("unsupported_format")
        )
    );

    let (status, body) = send(
        &app,
        multipart(&[("image", &png("5")), ("type", b"cholesterol")]),
    )
    .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_type"))
    );

    let (status, _) = send(&app, multipart(&[("type", b"glucose")])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(&app, multipart(&[("image", &png("5"))])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pgm_upload() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = io::encode_pgm(&render_number("93", &RenderStyle::default()).unwrap());
    let (status, body) = send(
        &app(dir.path()),
        multipart(&[("image", &pgm), ("type", b"weight")]),
    )
    .await;
    assert_eq!(
        (status, body["digits"].as_str()),
        (StatusCode::OK, Some("93"))
    );
}

#[tokio::test]
async fn blur_gate() {
    let dir = tempfile::tempdir().unwrap();
    let sharp = render_number("85", &RenderStyle::default()).unwrap();
    let mut blurred = sharp.clone();
    for _ in 0..4 {
        blurred = box_blur(&blurred);
    }
    let (s, b) = (
        sevenseg::imaging::blur_score(&sharp).unwrap(),
        sevenseg::imaging::blur_score(&blurred).unwrap(),
    );
    let opts = RecognizeOptions {
        blur_threshold: (s + b) / 2.0,
        ..RecognizeOptions::default()
    };
    let (app, _) = app_with(dir.path(), opts, 5 * 1024 * 1024);
    let (status, body) = send(
        &app,
        multipart(&[("image", &io::encode_png(&blurred)), ("type", b"pulse")]),
    )
    .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("blurry_image"))
    );
    let (status, body) = send(
        &app,
        multipart(&[("image", &io::encode_png(&sharp)), ("type", b"pulse")]),
    )
    .await;
    assert_eq!(
        (status, body["digits"].as_str()),
        (StatusCode::OK, Some("85"))
    );
}

#[tokio::test]
async fn upload_limit() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app_with(dir.path(), RecognizeOptions::default(), 1000);
    let img = io::encode_pgm(&render_number("120", &RenderStyle::default()).unwrap());
    assert!(img.len() > 1000);
    let (status, body) = send(&app, multipart(&[("image", &img), ("type", b"pulse")])).await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::PAYLOAD_TOO_LARGE, Some("payload_too_large"))
    );
    // Far over the body limit: rejected while streaming.
    let huge = vec![0u8; 200 * 1024];
    let (status, _) = send(&app, multipart(&[("image", &huge), ("type", b"pulse")])).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn readings_round_trip_and_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = send(
        &app,
        Request::get("/v1/readings").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!((status, body), (StatusCode::OK, serde_json::json!([])));

    let mut ids = Vec::new();
    for (kind, value, ts) in [
        ("systolic", "120", "2026-01-01T08:00:00Z"),
        ("weight", "181", "2026-01-01T09:00:00Z"),
        ("systolic", "118", "2026-01-02T08:00:00Z"),
    ] {
        let (status, body) = send(
            &app,
            json_post("/v1/readings", serde_json::json!({"type": kind, "value": value, "predicted": "128", "timestamp": ts})),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        assert_eq!(body["value"], value);
        assert_eq!(body["predicted"], "128");
        assert_eq!(body["type"], kind);
        ids.push(body["id"].as_u64().unwrap());
    }
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let (status, body) = send(
        &app,
        json_post(
            "/v1/readings",
            serde_json::json!({"type": "pulse", "value": "72", "predicted": "72"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(chrono::DateTime::parse_from_rfc3339(body["timestamp"].as_str().unwrap()).is_ok());

    let (_, body) = send(
        &app,
        Request::get("/v1/readings?limit=2")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    let list = body.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["type"], "pulse");
    assert_eq!(list[1]["value"], "118");

    let (_, body) = send(
        &app,
        Request::get("/v1/readings?type=weight")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(body.as_array().unwrap().len(), 1);
    assert_eq!(body[0]["value"], "181");

    drop(app);
    let restarted = self::app(dir.path());
    let (_, body) = send(
        &restarted,
        Request::get("/v1/readings?type=systolic")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    let values: Vec<&str> = body
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_str().unwrap())
        .collect();
    assert_eq!(values, ["118", "120"]);
}

#[tokio::test]
async fn reading_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for body in [
        serde_json::json!({"type": "systolic", "value": "12a", "predicted": "120"}),
        serde_json::json!({"type": "systolic", "value": "1200", "predicted": "120"}),
        serde_json::json!({"type": "systolic", "value": "120", "predicted": ""}),
        serde_json::json!({"type": "bmi", "value": "22", "predicted": "22"}),
        serde_json::json!({"type": "pulse", "value": "60", "predicted": "60", "timestamp": "yesterday"}),
        serde_json::json!({"type": "pulse"}),
    ] {
        let (status, resp) = send(&app, json_post("/v1/readings", body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {resp}");
    }
    let bad = Request::post("/v1/readings")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(send(&app, bad).await.0, StatusCode::BAD_REQUEST);
    for q in ["type=bmi", "limit=-1", "limit=x"] {
        let (status, _) = send(
            &app,
            Request::get(format!("/v1/readings?{q}"))
                .body(Body::empty())
                .unwrap(),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{q}");
    }
}

#[tokio::test]
async fn concurrent_identical_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let img = png("907");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let (app, img) = (app.clone(), img.clone());
            tokio::spawn(async move {
                send(&app, multipart(&[("image", &img), ("type", b"glucose")])).await
            })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.iter().all(|b| *b == bodies[0]));
    assert_eq!(bodies[0]["digits"], "907");
}

#[tokio::test]
async fn static_files() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>hi</h1>").unwrap();
    let store = ReadingStore::open(&dir.path().join("r.jsonl")).unwrap();
    let app = router(
        AppState::new(model().clone(), RecognizeOptions::default(), store, 1 << 20),
        Some(&ui),
    );
    let resp = app
        .clone()
        .oneshot(Request::get("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(
        &to_bytes(resp.into_body(), 1024).await.unwrap()[..],
        b"<h1>hi</h1>"
    );
    let (status, _) = send(
        &app,
        Request::get("/v1/health").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}
