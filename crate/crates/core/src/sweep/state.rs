//! The persisted record of a sweep: config, per-point outcomes and labels.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::SweepConfig;
use crate::analysis::ModelSummary;
use crate::error::{Error, Result};
use crate::eval::{LabelStore, MetricReport};
use crate::hyper::HyperParams;

/// Bumped when the state file layout changes incompatibly.
pub const STATE_FORMAT: u32 = 1;

const SECTIONS: [&str; 4] = ["format", "config", "entries", "labels"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Trained,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub model_id: String,
    pub hyper: HyperParams,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    /// Model file, relative to the state file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunEntry {
    pub fn pending(model_id: String, hyper: HyperParams) -> Self {
        RunEntry {
            model_id,
            hyper,
            status: Status::Pending,
            metrics: None,
            model_path: None,
            error: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub trained: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunState {
    pub format: u32,
    pub config: SweepConfig,
    pub entries: Vec<RunEntry>,
    pub labels: LabelStore,
}

impl RunState {
    pub fn new(config: SweepConfig) -> Self {
        RunState {
            format: STATE_FORMAT,
            config,
            entries: Vec::new(),
            labels: LabelStore::new(),
        }
    }

    pub fn entry(&self, model_id: &str) -> Option<&RunEntry> {
        self.entries.iter().find(|e| e.model_id == model_id)
    }

    pub fn entry_mut(&mut self, model_id: &str) -> Option<&mut RunEntry> {
        self.entries.iter_mut().find(|e| e.model_id == model_id)
    }

    pub fn trained(&self) -> impl Iterator<Item = &RunEntry> {
        self.entries.iter().filter(|e| e.status == Status::Trained)
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for e in &self.entries {
            match e.status {
                Status::Pending => c.pending += 1,
                Status::Trained => c.trained += 1,
                Status::Failed => c.failed += 1,
            }
        }
        c
    }

    /// Trained models as seen by the analysis views.
    pub fn summaries(&self) -> Vec<ModelSummary> {
        self.trained()
            .map(|e| ModelSummary {
                model_id: e.model_id.clone(),
                hyper: e.hyper.clone(),
                metrics: e.metrics.clone().unwrap_or_default(),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != STATE_FORMAT {
            return Err(Error::format(format!(
                "state format {} is not supported (expected {STATE_FORMAT})",
                self.format
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.model_id.as_str()) {
                return Err(Error::format(format!("duplicate model id {}", e.model_id)));
            }
            if e.status == Status::Trained && e.metrics.is_none() {
                return Err(Error::format(format!("trained model {} has no metrics", e.model_id)));
            }
        }
        if !self.labels.is_consistent() {
            return Err(Error::format("the `labels` section has inconsistent ids"));
        }
        Ok(())
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)?;
        let Value::Object(map) = &raw else {
            return Err(Error::format("state file is not a JSON object"));
        };
        if let Some(missing) = SECTIONS.iter().find(|s| !map.contains_key(**s)) {
            return Err(Error::format(format!("state file is missing the `{missing}` section")));
        }
        for section in SECTIONS {
            if section == "format" {
                continue;
            }
            // Decode sections one at a time so errors name the culprit.
            let check = match section {
                "config" => serde_json::from_value::<SweepConfig>(map[section].clone()).map(|_| ()),
                "entries" => serde_json::from_value::<Vec<RunEntry>>(map[section].clone()).map(|_| ()),
                _ => serde_json::from_value::<LabelStore>(map[section].clone()).map(|_| ()),
            };
            check.map_err(|e| Error::format(format!("`{section}` section: {e}")))?;
        }
        let state: RunState = serde_json::from_value(raw)?;
        state.validate()?;
        Ok(state)
    }
}

/// Write `contents` via a temporary file and rename, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn export_state(state: &RunState, path: &Path) -> Result<()> {
    write_atomic(path, state.to_json().as_bytes())
}

pub fn import_state(path: &Path) -> Result<RunState> {
    let text = fs::read_to_string(path)?;
    RunState::from_json(&text)
}
