//! Static documentation bundle of a run: `index.html`, `models.csv` and
//! `correlations.csv`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lexiscope_core::analysis::pairwise_correlations;
use lexiscope_core::hyper::HyperParams;
use lexiscope_core::sweep::{RunEntry, RunState};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn metric_names(state: &RunState) -> Vec<String> {
    let names: BTreeSet<&String> = state
        .entries
        .iter()
        .filter_map(|e| e.metrics.as_ref())
        .flat_map(|m| m.scores.keys())
        .collect();
    names.into_iter().cloned().collect()
}

fn hyper_cell(h: &HyperParams, field: &str) -> String {
    match field {
        "architecture" => h.architecture.to_string(),
        "hs" => h.hs.to_string(),
        _ => h.dimension(field).map(|d| d.as_f64().to_string()).unwrap_or_default(),
    }
}

fn metric_cell(e: &RunEntry, name: &str) -> String {
    e.metrics
        .as_ref()
        .and_then(|m| m.get(name))
        .map(|v| v.to_string())
        .unwrap_or_default()
}

fn status_str(e: &RunEntry) -> String {
    serde_json::to_value(e.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn write_models_csv(state: &RunState, metrics: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header = vec!["model_id".to_string(), "status".to_string()];
    header.extend(HyperParams::FIELDS.iter().map(|s| s.to_string()));
    header.extend(metrics.iter().cloned());
    w.write_record(&header)?;
    for e in &state.entries {
        let mut row = vec![e.model_id.clone(), status_str(e)];
        row.extend(HyperParams::FIELDS.iter().map(|f| hyper_cell(&e.hyper, f)));
        row.extend(metrics.iter().map(|m| metric_cell(e, m)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_correlations_csv(state: &RunState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["x", "y", "r", "n"])?;
    for c in pairwise_correlations(&state.summaries()) {
        let r = c.r.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([c.x.as_str(), c.y.as_str(), r.as_str(), c.model_ids.len().to_string().as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn html(state: &RunState, metrics: &[String]) -> String {
    let counts = state.counts();
    let mut h = String::new();
    let _ = write!(
        h,
        "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>lexiscope report: {corpus}</title>\n\
         <style>body{{font-family:sans-serif;margin:2em}}table{{border-collapse:collapse}}\
         td,th{{border:1px solid #ccc;padding:2px 6px;text-align:right}}td:first-child{{text-align:left}}</style>\n\
         </head><body>\n<h1>Run on {corpus}</h1>\n\
         <p>{} trained, {} failed, {} pending. Data: <a href=\"models.csv\">models.csv</a>, \
         <a href=\"correlations.csv\">correlations.csv</a>.</p>\n",
        counts.trained,
        counts.failed,
        counts.pending,
        corpus = escape(&state.config.corpus_id()),
    );

    h.push_str("<h2>Best model per metric</h2>\n<table><tr><th>metric</th><th>model</th><th>value</th></tr>\n");
    for m in metrics {
        let best = state
            .trained()
            .filter_map(|e| Some((e, e.metrics.as_ref()?.get(m)?)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((e, v)) = best {
            let _ = writeln!(h, "<tr><td>{}</td><td>{}</td><td>{v:.4}</td></tr>", escape(m), escape(&e.model_id));
        }
    }
    h.push_str("</table>\n");

    h.push_str("<h2>Models</h2>\n<table><tr><th>model</th><th>status</th>");
    for f in HyperParams::FIELDS.iter().map(|s| s.to_string()).chain(metrics.iter().cloned()) {
        let _ = write!(h, "<th>{}</th>", escape(&f));
    }
    h.push_str("</tr>\n");
    for e in &state.entries {
        let _ = write!(h, "<tr><td>{}</td><td>{}</td>", escape(&e.model_id), status_str(e));
        for f in HyperParams::FIELDS {
            let _ = write!(h, "<td>{}</td>", escape(&hyper_cell(&e.hyper, f)));
        }
        for m in metrics {
            let v = e.metrics.as_ref().and_then(|r| r.get(m));
            let _ = write!(h, "<td>{}</td>", v.map(|v| format!("{v:.4}")).unwrap_or_default());
        }
        h.push_str("</tr>\n");
    }
    h.push_str("</table>\n");

    h.push_str("<h2>Correlations</h2>\n<table><tr><th>x</th><th>y</th><th>r</th><th>n</th></tr>\n");
    for c in pairwise_correlations(&state.summaries()).iter().filter(|c| c.x != c.y) {
        let r = c.r.map(|r| format!("{r:.3}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            h,
            "<tr><td>{}</td><td>{}</td><td>{r}</td><td>{}</td></tr>",
            escape(&c.x),
            escape(&c.y),
            c.model_ids.len()
        );
    }
    h.push_str("</table>\n");

    let labels = state.labels.list_labels();
    if !labels.is_empty() {
        h.push_str("<h2>Labels</h2>\n<table><tr><th>id</th><th>pair</th><th>relation</th></tr>\n");
        for l in labels {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{} / {}</td><td>{}</td></tr>",
                l.id,
                escape(&l.word_a),
                escape(&l.word_b),
                l.relation
            );
        }
        h.push_str("</table>\n");
    }

    let config = serde_json::to_string_pretty(&state.config).unwrap_or_default();
    let _ = write!(h, "<h2>Sweep config</h2>\n<pre>{}</pre>\n</body></html>\n", escape(&config));
    h
}

/// Write the bundle into `dir` and return the path of `index.html`.
pub fn write_report(state: &RunState, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let metrics = metric_names(state);
    write_models_csv(state, &metrics, &dir.join("models.csv"))?;
    write_correlations_csv(state, &dir.join("correlations.csv"))?;
    let index = dir.join("index.html");
    fs::write(&index, html(state, &metrics)).with_context(|| format!("cannot write {}", index.display()))?;
    Ok(index)
}
