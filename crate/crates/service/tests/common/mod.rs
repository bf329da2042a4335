//! A small trained population served through the router in-process.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lexiscope_core::sweep::{run_sweep, SweepConfig};
use lexiscope_service::{router, AppState, ServerConfig};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const POSITIVE: [&str; 5] = ["good", "great", "nice", "fine", "happy"];
pub const NEGATIVE: [&str; 5] = ["bad", "awful", "poor", "nasty", "sad"];

/// Two-topic text from a fixed linear congruential sequence.
pub fn corpus(lines: usize) -> String {
    let mut x: u64 = 12345;
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 33) as usize % 5
    };
    let mut out = String::new();
    for i in 0..lines {
        let block = if i % 2 == 0 { &POSITIVE } else { &NEGATIVE };
        let words: Vec<&str> = (0..9).map(|_| block[next()]).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_inputs(dir: &Path) {
    fs::write(dir.join("toy.txt"), corpus(120)).unwrap();
    fs::write(
        dir.join("triples.tsv"),
        "good\tgreat\tbad\ttrain\nbad\tawful\tgood\ttrain\nnice\tfine\tpoor\ttest\n",
    )
    .unwrap();
    let mut docs = String::new();
    for i in 0..20 {
        docs.push_str(&format!("pos\t{} {}\n", POSITIVE[i % 5], POSITIVE[(i + 1) % 5]));
        docs.push_str(&format!("neg\t{} {}\n", NEGATIVE[i % 5], NEGATIVE[(i + 2) % 5]));
    }
    fs::write(dir.join("docs.tsv"), docs).unwrap();
}

/// Sweep config JSON over the files of [`write_inputs`], paths relative.
pub fn sweep_json(windows: &[usize]) -> Value {
    serde_json::json!({
        "corpus": "toy.txt",
        "min_count": 1,
        "params": {"window": windows},
        "fixed": {"size": 12, "iterations": 2, "subsample_t": -1},
        "resources": {"triples": "triples.tsv", "documents": "docs.tsv"}
    })
}

pub struct Fixture {
    pub dir: TempDir,
    pub app: Router,
    pub state: AppState,
}

impl Fixture {
    pub fn run_dir(&self) -> PathBuf {
        self.dir.path().join("run")
    }
}

/// Three trained models (window 2, 3, 4) in `run/`.
pub fn fixture(max_loaded_models: Option<usize>) -> Fixture {
    let dir = TempDir::new().unwrap();
    write_inputs(dir.path());
    let mut config: SweepConfig = serde_json::from_value(sweep_json(&[2, 3, 4])).unwrap();
    config.resolve_paths(dir.path());
    run_sweep(&config, 1, &dir.path().join("run")).unwrap();
    serve_dir(dir, max_loaded_models)
}

/// Serve `dir/run`, whatever it contains.
pub fn serve_dir(dir: TempDir, max_loaded_models: Option<usize>) -> Fixture {
    let config = ServerConfig {
        run_dir: dir.path().join("run"),
        data_dir: Some(dir.path().to_path_buf()),
        max_loaded_models,
        ..ServerConfig::default()
    };
    let state = AppState::open(config).unwrap();
    Fixture {
        app: router(state.clone()),
        state,
        dir,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Vec<u8>,
    pub json: Value,
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    Reply { status, bytes, json }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body)).await
}

/// Model ids in the population, in state order.
pub async fn model_ids(app: &Router) -> Vec<String> {
    get(app, "/models").await.json["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["model_id"].as_str().unwrap().to_string())
        .collect()
}

/// Shape checks for the JSON payloads.
pub mod schema {
    use serde_json::Value;

    #[derive(Clone, Copy)]
    pub enum Kind {
        Str,
        Num,
        Bool,
        Arr,
        Obj,
        OptStr,
        OptNum,
        OptObj,
        OptArr,
    }

    fn matches(v: Option<&Value>, kind: Kind) -> bool {
        use Kind::*;
        match (kind, v) {
            (Str, Some(Value::String(_))) => true,
            (Num, Some(Value::Number(_))) => true,
            (Bool, Some(Value::Bool(_))) => true,
            (Arr, Some(Value::Array(_))) => true,
            (Obj, Some(Value::Object(_))) => true,
            (OptStr, None | Some(Value::Null | Value::String(_))) => true,
            (OptNum, None | Some(Value::Null | Value::Number(_))) => true,
            (OptObj, None | Some(Value::Null | Value::Object(_))) => true,
            (OptArr, None | Some(Value::Null | Value::Array(_))) => true,
            _ => false,
        }
    }

    /// `Err` names the first field that is missing or mistyped.
    pub fn check(v: &Value, fields: &[(&str, Kind)]) -> Result<(), String> {
        for (name, kind) in fields {
            if !matches(v.get(*name), *kind) {
                return Err(format!("field `{name}` in {}", truncate(v)));
            }
        }
        Ok(())
    }

    pub fn each(v: &Value, list: &str, fields: &[(&str, Kind)]) -> Result<(), String> {
        let items = v.get(list).and_then(Value::as_array).ok_or_else(|| format!("`{list}` is not a list"))?;
        items.iter().try_for_each(|item| check(item, fields))
    }

    pub fn versioned(v: &Value) -> Result<(), String> {
        check(v, &[("label_store_version", Kind::Num), ("population_version", Kind::Num)])
    }

    pub fn error(v: &Value, status: u16) -> Result<(), String> {
        let e = v.get("error").ok_or("no `error` object")?;
        check(e, &[("message", Kind::Str), ("token", Kind::OptStr)])?;
        if e["status"] != status {
            return Err(format!("error status {} != {status}", e["status"]));
        }
        Ok(())
    }

    fn truncate(v: &Value) -> String {
        let s = v.to_string();
        if s.len() > 200 {
            format!("{}...", &s[..200])
        } else {
            s
        }
    }
}
