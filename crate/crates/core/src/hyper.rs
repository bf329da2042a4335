//! One point in the hyperparameter space.
//!
//! Field names here are the names used everywhere else: sweep config keys,
//! CLI flags and the dimension names of the comparison views.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sentinel for "off" on `lockf`, `retro` and `subsample_t`.
pub const DISABLED: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "skip-gram")]
    SkipGram,
    #[serde(rename = "cbow")]
    Cbow,
}

impl Architecture {
    /// Declared ordinal order, used when the dimension is plotted.
    pub const ORDER: [Architecture; 2] = [Architecture::SkipGram, Architecture::Cbow];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::SkipGram => "skip-gram",
            Architecture::Cbow => "cbow",
        }
    }

    pub fn ordinal(self) -> f64 {
        match self {
            Architecture::SkipGram => 0.0,
            Architecture::Cbow => 1.0,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip-gram" | "skipgram" | "sg" => Ok(Architecture::SkipGram),
            "cbow" => Ok(Architecture::Cbow),
            other => Err(Error::config(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Output layer. Hierarchical softmax and negative sampling can be active at
/// the same time, in which case both sets of output weights are trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    NegativeSampling { k: usize },
    HierarchicalSoftmax,
    Both { k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub size: usize,
    pub window: usize,
    pub architecture: Architecture,
    /// Hierarchical softmax over a Huffman tree.
    pub hs: bool,
    /// Negative samples per positive pair; 0 turns negative sampling off.
    pub negative: usize,
    pub alpha: f64,
    pub iterations: usize,
    /// Subsampling threshold in (0, 1], or -1.
    pub subsample_t: f64,
    /// Pretrained blend weight in [0, 1], or -1.
    pub lockf: f64,
    /// Retrofitting strength in [0, 2] (larger keeps vectors closer to the
    /// trained ones), or -1.
    pub retro: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            size: 100,
            window: 5,
            architecture: Architecture::SkipGram,
            hs: false,
            negative: 5,
            alpha: 0.025,
            iterations: 5,
            subsample_t: 1e-4,
            lockf: DISABLED,
            retro: DISABLED,
            seed: 1,
        }
    }
}

impl HyperParams {
    pub const FIELDS: [&'static str; 11] = [
        "size",
        "window",
        "architecture",
        "hs",
        "negative",
        "alpha",
        "iterations",
        "subsample_t",
        "lockf",
        "retro",
        "seed",
    ];

    pub fn is_field(name: &str) -> bool {
        Self::FIELDS.contains(&name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("size must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("window must be positive"));
        }
        if !self.hs && self.negative == 0 {
            return Err(Error::config(
                "no output layer: enable hs or set negative > 0",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha must be a positive real"));
        }
        if self.subsample_t != DISABLED && !(self.subsample_t > 0.0 && self.subsample_t <= 1.0) {
            return Err(Error::config("subsample_t must be in (0, 1] or -1"));
        }
        if self.lockf != DISABLED && !(0.0..=1.0).contains(&self.lockf) {
            return Err(Error::config("lockf must be in [0, 1] or -1"));
        }
        if self.retro != DISABLED && !(0.0..=2.0).contains(&self.retro) {
            return Err(Error::config("retro must be in [0, 2] or -1"));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        match (self.hs, self.negative) {
            (true, 0) => Objective::HierarchicalSoftmax,
            (true, k) => Objective::Both { k },
            (false, k) => Objective::NegativeSampling { k },
        }
    }

    pub fn subsample(&self) -> Option<f64> {
        (self.subsample_t != DISABLED).then_some(self.subsample_t)
    }

    pub fn lockf(&self) -> Option<f64> {
        (self.lockf != DISABLED).then_some(self.lockf)
    }

    pub fn retro(&self) -> Option<f64> {
        (self.retro != DISABLED).then_some(self.retro)
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("HyperParams always serializes")
    }

    /// Value of a named field as a view dimension.
    pub fn dimension(&self, name: &str) -> Option<DimValue> {
        let n = |x: f64| Some(DimValue::Number(x));
        match name {
            "size" => n(self.size as f64),
            "window" => n(self.window as f64),
            "architecture" => Some(DimValue::Category {
                label: self.architecture.as_str().to_string(),
                ordinal: self.architecture.ordinal(),
            }),
            "hs" => n(if self.hs { 1.0 } else { 0.0 }),
            "negative" => n(self.negative as f64),
            "alpha" => n(self.alpha),
            "iterations" => n(self.iterations as f64),
            "subsample_t" => n(self.subsample_t),
            "lockf" => n(self.lockf),
            "retro" => n(self.retro),
            "seed" => n(self.seed as f64),
            _ => None,
        }
    }
}

/// Stable identifier for a model trained on `corpus_id` with `hyper`.
pub fn model_id(corpus_id: &str, hyper: &HyperParams) -> String {
    let mut h = Sha256::new();
    h.update(corpus_id.as_bytes());
    h.update([0u8]);
    h.update(hyper.canonical_json().as_bytes());
    let digest = h.finalize();
    hex::encode(&digest[..8])
}

/// A hyperparameter or metric value as seen by filters, sorts and plots.
#[derive(Clone, Debug, PartialEq)]
pub enum DimValue {
    Number(f64),
    Category { label: String, ordinal: f64 },
}

impl DimValue {
    /// Numeric position on an axis; categories use their declared ordinal.
    pub fn as_f64(&self) -> f64 {
        match self {
            DimValue::Number(x) => *x,
            DimValue::Category { ordinal, .. } => *ordinal,
        }
    }
}
