mod common;

use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::{call, fixture, get, model_ids, post};
use lexiscope_core::analysis::{filter_models, FilterSpec};
use lexiscope_core::eval::{read_triples, triples_score, Split};
use lexiscope_core::sweep::import_state;
use lexiscope_core::trainer::load_model;
use serde_json::{json, Value};

#[tokio::test]
async fn heatmap_rows_follow_load_order() {
    let f = fixture(None);
    let ids = model_ids(&f.app).await;
    assert_eq!(ids.len(), 3);
    for id in [&ids[2], &ids[0]] {
        assert_eq!(post(&f.app, "/session/load", json!({"model_id": id})).await.status, StatusCode::OK);
    }
    let r = get(&f.app, "/views/heatmap?query=good&k=4").await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.json);
    assert_eq!(r.json["row_models"], json!([ids[2], ids[0]]));
    assert_eq!(r.json["cells"].as_array().unwrap().len(), 2);
    assert!(r.json["col_words"].as_array().unwrap().len() >= 4);

    let sorted = get(&f.app, "/views/heatmap?query=good&sort=hyperparameter:window").await;
    assert_eq!(sorted.json["row_models"], json!([ids[0], ids[2]]));
    assert_eq!(sorted.json["sort_mode"], "hyperparameter:window");
}

#[tokio::test]
async fn session_loading_and_cap() {
    let f = fixture(Some(2));
    let ids = model_ids(&f.app).await;
    assert_eq!(post(&f.app, "/session/load", json!({"model_id": "nope"})).await.status, StatusCode::NOT_FOUND);
    for id in &ids[..2] {
        post(&f.app, "/session/load", json!({"model_id": id})).await;
    }
    // Loading again is a no-op, not a cap violation.
    assert_eq!(post(&f.app, "/session/load", json!({"model_id": ids[0]})).await.status, StatusCode::OK);
    let over = post(&f.app, "/session/load", json!({"model_id": ids[2]})).await;
    assert_eq!(over.status, StatusCode::CONFLICT);
    common::schema::error(&over.json, 409).unwrap();

    let uri = format!("/session/load/{}", ids[0]);
    let r = call(&f.app, Method::DELETE, &uri, None).await;
    assert_eq!(r.json["loaded_models"], json!([ids[1]]));
    assert_eq!(call(&f.app, Method::DELETE, &uri, None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(post(&f.app, "/session/load", json!({"model_id": ids[2]})).await.status, StatusCode::OK);
    assert_eq!(get(&f.app, "/session").await.json["max_loaded_models"], 2);
}

#[tokio::test]
async fn query_errors_name_the_token() {
    let f = fixture(None);
    assert_eq!(get(&f.app, "/views/heatmap?query=good").await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let id = &model_ids(&f.app).await[0];
    post(&f.app, "/session/load", json!({"model_id": id})).await;

    let oov = get(&f.app, "/views/heatmap?query=good%20-zebra").await;
    assert_eq!(oov.status, StatusCode::BAD_REQUEST);
    assert_eq!(oov.json["error"]["token"], "zebra");
    assert_eq!(get(&f.app, "/views/heatmap?query=--").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&f.app, "/views/heatmap").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&f.app, "/views/heatmap?query=good&k=0").await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&f.app, "/views/heatmap?query=good&k=many").await.status, StatusCode::BAD_REQUEST);
    let sort = get(&f.app, "/views/heatmap?query=good&sort=metric:beauty").await;
    assert_eq!(sort.status, StatusCode::BAD_REQUEST);
    assert_eq!(sort.json["error"]["token"], "beauty");
    assert_eq!(get(&f.app, "/views/heatmap?query=good&sort=sideways").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(post(&f.app, "/session/query", json!({"query": "good - bad"})).await.status, StatusCode::OK);
    assert_eq!(get(&f.app, "/session").await.json["active_query"], "good - bad");
}

#[tokio::test]
async fn projection_prewarms_then_refines() {
    let f = fixture(None);
    let id = model_ids(&f.app).await[1].clone();
    let uri = format!("/views/projection?model={id}&query=good&k=6");
    assert_eq!(get(&f.app, &uri).await.status, StatusCode::NOT_FOUND);
    post(&f.app, "/session/load", json!({"model_id": id})).await;

    let first = get(&f.app, &uri).await;
    assert_eq!(first.status, StatusCode::OK, "{}", first.json);
    assert_eq!(first.json["iteration"], 150);
    assert_eq!(first.json["focus"], json!(["good"]));
    let mut last = 150;
    let started = Instant::now();
    loop {
        let r = get(&f.app, &uri).await;
        let it = r.json["iteration"].as_u64().unwrap();
        assert!(it >= last);
        last = it;
        if r.json["done"] == true {
            assert!(r.json["points"].as_array().unwrap().iter().all(|p| p["x"].is_f64() && p["y"].is_f64()));
            // A finished projection reads back identically.
            assert_eq!(get(&f.app, &uri).await.bytes, r.bytes);
            break;
        }
        assert!(started.elapsed() < Duration::from_secs(60), "projection never finished");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert_eq!(last, 1000);
    let too_few = format!("/views/projection?model={id}&query=good&k=1");
    assert_eq!(get(&f.app, &too_few).await.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn label_mutations_return_recomputed_scores() {
    let f = fixture(None);
    let ids = model_ids(&f.app).await;
    let empty = post(&f.app, "/labels", json!({"word_a": "good", "word_b": "fine", "relation": "synonym"})).await;
    assert_eq!(empty.status, StatusCode::UNPROCESSABLE_ENTITY);
    for id in &ids[..2] {
        post(&f.app, "/session/load", json!({"model_id": id})).await;
    }
    let v0 = get(&f.app, "/labels").await.json["label_store_version"].as_u64().unwrap();

    let r = post(&f.app, "/labels", json!({"word_a": "good", "word_b": "fine", "relation": "synonym"})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.json);
    let r = post(&f.app, "/labels", json!({"word_a": "good", "word_b": "sad", "relation": "antonym"})).await;
    let v2 = r.json["label_store_version"].as_u64().unwrap();
    assert!(v2 > v0 + 1);

    // From scratch: file triples of the train split plus the joined labels.
    let mut triples: Vec<_> = read_triples(std::io::BufReader::new(std::fs::File::open(f.dir.path().join("triples.tsv")).unwrap()))
        .unwrap()
        .into_iter()
        .filter(|t| t.split == Split::Train)
        .collect();
    triples.push(lexiscope_core::eval::Triple::new("good", "fine", "sad", Split::Train).unwrap());
    let state = import_state(&f.run_dir().join("state.json")).unwrap();
    for id in &ids[..2] {
        let entry = state.entry(id).unwrap();
        let model = load_model(&f.run_dir().join(entry.model_path.as_ref().unwrap())).unwrap();
        let expect = triples_score(&model, &triples).unwrap().value;
        assert_eq!(r.json["f_t"][id].as_f64().unwrap(), expect);
    }
    assert_eq!(r.json["f_t"].as_object().unwrap().len(), 2);

    let dup = post(&f.app, "/labels", json!({"word_a": "sad", "word_b": "good", "relation": "synonym"})).await;
    assert_eq!(dup.status, StatusCode::CONFLICT);
    let oov = post(&f.app, "/labels", json!({"word_a": "good", "word_b": "zebra", "relation": "synonym"})).await;
    assert_eq!(oov.status, StatusCode::BAD_REQUEST);
    assert_eq!(oov.json["error"]["token"], "zebra");
    let bad = post(&f.app, "/labels", json!({"word_a": "good", "word_b": "fine", "relation": "cousin"})).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&f.app, "/labels").await.json["label_store_version"].as_u64().unwrap(), v2);

    let id = r.json["label"]["id"].as_u64().unwrap();
    let body = json!({"word_a": "good", "word_b": "nasty", "relation": "antonym"});
    let put = call(&f.app, Method::PUT, &format!("/labels/{id}"), Some(body.clone())).await;
    assert_eq!(put.status, StatusCode::OK);
    assert!(put.json["label_store_version"].as_u64().unwrap() > v2);
    assert_eq!(call(&f.app, Method::PUT, "/labels/999", Some(body)).await.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&f.app, Method::DELETE, "/labels/x", None).await.status, StatusCode::BAD_REQUEST);
    let del = call(&f.app, Method::DELETE, &format!("/labels/{id}"), None).await;
    assert_eq!(del.status, StatusCode::OK);
    assert_eq!(call(&f.app, Method::DELETE, &format!("/labels/{id}"), None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&f.app, "/labels").await.json["labels"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn filters_match_the_library() {
    let f = fixture(None);
    let spec = json!({"window": {"min": 2, "max": 3}});
    let r = post(&f.app, "/filters", spec.clone()).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.json);
    let state = import_state(&f.run_dir().join("state.json")).unwrap();
    let parsed: FilterSpec = serde_json::from_value(spec).unwrap();
    let expect = filter_models(&state.summaries(), &parsed).unwrap();
    assert_eq!(r.json["matched"], json!(expect));
    assert_eq!(expect.len(), 2);
    assert_eq!(get(&f.app, "/filters").await.json["matched"], json!(expect));

    let parallel = get(&f.app, "/views/parallel").await.json;
    let matched: Vec<&str> = parallel["models"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|m| m["matched"] == true)
        .map(|m| m["model_id"].as_str().unwrap())
        .collect();
    assert_eq!(json!(matched), json!(expect));

    let unknown = post(&f.app, "/filters", json!({"colour": {"min": 0, "max": 1}})).await;
    assert_eq!(unknown.status, StatusCode::BAD_REQUEST);
    assert_eq!(unknown.json["error"]["token"], "colour");
    let inverted = post(&f.app, "/filters", json!({"window": {"min": 3, "max": 2}})).await;
    assert_eq!(inverted.status, StatusCode::UNPROCESSABLE_ENTITY);
    let arch = post(&f.app, "/filters", json!({"architecture": {"one_of": ["cbow"]}})).await;
    assert_eq!(arch.json["matched"], json!([]));
}

#[tokio::test]
async fn parallel_and_splom_describe_the_population() {
    let f = fixture(None);
    let p = get(&f.app, "/views/parallel").await.json;
    let dims = p["dimensions"].as_array().unwrap();
    assert_eq!(dims[0]["name"], "size");
    let window = dims.iter().find(|d| d["name"] == "window").unwrap();
    assert_eq!(window["extent"], json!([2.0, 4.0]));
    assert_eq!(window["role"], "hyperparameter");
    let arch = dims.iter().find(|d| d["name"] == "architecture").unwrap();
    assert_eq!(arch["type"], "categorical");
    let f_t = dims.iter().find(|d| d["name"] == "f_T").unwrap();
    assert_eq!(f_t["role"], "metric");
    // Hyperparameters come before metrics.
    let first_metric = dims.iter().position(|d| d["role"] == "metric").unwrap();
    assert!(dims[first_metric..].iter().all(|d| d["role"] == "metric"));

    let s = get(&f.app, "/views/splom").await.json;
    let c = s["correlations"].as_array().unwrap();
    let n = dims.len();
    assert_eq!(c.len(), n * (n + 1) / 2);
    let ww = c.iter().find(|c| c["x"] == "window" && c["y"] == "window").unwrap();
    assert!((ww["r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let size = c.iter().find(|c| c["x"] == "size" && c["y"] == "window").unwrap();
    assert_eq!(size["r"], Value::Null);
}

#[tokio::test]
async fn state_export_import_roundtrip() {
    let f = fixture(None);
    let id = model_ids(&f.app).await[0].clone();
    post(&f.app, "/session/load", json!({"model_id": id})).await;
    post(&f.app, "/labels", json!({"word_a": "good", "word_b": "great", "relation": "synonym"})).await;
    let a = get(&f.app, "/state/export").await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.json["state"]["labels"]["entries"].as_array().unwrap().len(), 1);
    let pop = a.json["population_version"].as_u64().unwrap();

    let imported = post(&f.app, "/state/import", a.json.clone()).await;
    assert_eq!(imported.status, StatusCode::OK, "{}", imported.json);
    assert_eq!(imported.json["loaded_models"], json!([id]));
    assert!(imported.json["population_version"].as_u64().unwrap() > pop);
    let b = get(&f.app, "/state/export").await;
    assert_eq!(
        serde_json::to_string_pretty(&a.json["state"]).unwrap(),
        serde_json::to_string_pretty(&b.json["state"]).unwrap()
    );
    // A bare state document works too.
    assert_eq!(post(&f.app, "/state/import", a.json["state"].clone()).await.status, StatusCode::OK);

    let mut broken = a.json["state"].clone();
    broken.as_object_mut().unwrap().remove("entries");
    let r = post(&f.app, "/state/import", broken).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.json["error"]["message"].as_str().unwrap().contains("`entries`"));
    let r = call(&f.app, Method::POST, "/state/import", None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sweeps_run_in_the_background() {
    let dir = tempfile::TempDir::new().unwrap();
    common::write_inputs(dir.path());
    let f = common::serve_dir(dir, None);
    assert_eq!(get(&f.app, "/state/export").await.status, StatusCode::NOT_FOUND);
    assert_eq!(post(&f.app, "/sweep/cancel", json!({})).await.status, StatusCode::CONFLICT);
    let mut bad = common::sweep_json(&[2]);
    bad["corpus"] = json!("missing.txt");
    assert_eq!(post(&f.app, "/sweep", bad).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let mut unknown = common::sweep_json(&[2]);
    unknown["params"] = json!({"colour": [1]});
    assert_eq!(post(&f.app, "/sweep", unknown).await.status, StatusCode::UNPROCESSABLE_ENTITY);

    let r = post(&f.app, "/sweep", common::sweep_json(&[2, 3])).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.json);
    assert_eq!(r.json["total"], 2);
    let started = Instant::now();
    let status = loop {
        let s = get(&f.app, "/sweep/status").await.json;
        // Reads keep working while the sweep runs.
        assert_eq!(get(&f.app, "/models").await.status, StatusCode::OK);
        if s["running"] == false {
            break s;
        }
        assert!(started.elapsed() < Duration::from_secs(60));
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(status["counts"]["trained"], 2, "{status}");
    assert_eq!(status["error"], Value::Null);
    assert_eq!(model_ids(&f.app).await.len(), 2);
    assert!(f.run_dir().join("state.json").is_file());
}

#[tokio::test]
async fn reads_are_idempotent_and_versioned() {
    let f = fixture(None);
    let id = model_ids(&f.app).await[0].clone();
    post(&f.app, "/session/load", json!({"model_id": id})).await;
    for uri in [
        "/models",
        "/session",
        "/views/heatmap?query=good&sort=cluster",
        "/views/parallel",
        "/views/splom",
        "/filters",
        "/labels",
        "/sweep/status",
        "/state/export",
    ] {
        let a = get(&f.app, uri).await;
        assert_eq!(a.status, StatusCode::OK, "{uri}: {}", a.json);
        common::schema::versioned(&a.json).unwrap_or_else(|e| panic!("{uri}: {e}"));
        assert_eq!(a.bytes, get(&f.app, uri).await.bytes, "{uri}");
    }
    let r = get(&f.app, "/nowhere").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    common::schema::error(&r.json, 404).unwrap();
}
