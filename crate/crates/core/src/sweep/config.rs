//! Declarative sweep configuration and its expansion into points.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hyper::{Architecture, HyperParams};

fn default_min_count() -> u64 {
    crate::corpus::DEFAULT_MIN_COUNT
}

/// A sweep, as written in its JSON file.
///
/// ```json
/// {
///   "corpus": "text8",
///   "strategy": {"kind": "grid"},
///   "params": {
///     "size": {"min": 100, "max": 400, "step": 50},
///     "architecture": ["skip-gram", "cbow"]
///   },
///   "fixed": {"iterations": 5}
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub corpus: PathBuf,
    /// Identifies the corpus in model ids. Defaults to the corpus file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_id: Option<String>,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Swept hyperparameters, in the order that drives grid expansion.
    #[serde(default)]
    pub params: IndexMap<String, ParamSpec>,
    /// Values applied to every point.
    #[serde(default)]
    pub fixed: IndexMap<String, Value>,
    /// Cap on simultaneously loaded models in the service; unlimited if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_loaded_models: Option<usize>,
    #[serde(default)]
    pub resources: Resources,
    /// Seed for the sentiment train/test split.
    #[serde(default)]
    pub split_seed: u64,
    /// Only consider the most frequent words as analogy answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analogy_restrict_vocab: Option<usize>,
}

/// Optional inputs shared by every point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    /// Vectors blended in when `lockf` is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrained: Option<PathBuf>,
    /// Retrofitting lexicon, used when `retro` is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triples: Option<PathBuf>,
    /// Labeled documents for the sentiment metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documents: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analogies: Option<PathBuf>,
    /// Initial label file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Strategy {
    #[default]
    Grid,
    Random { n_samples: usize, seed: u64 },
}

/// Values for one hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    List(Vec<Value>),
    Range(RangeSpec),
    Dist(Distribution),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RangeSpec {
    /// `min, min + step, ...` up to `max` inclusive. Computed by
    /// multiplication so long ranges do not drift.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { min: f64, max: f64 },
    LogUniform { min: f64, max: f64 },
    Choice { values: Vec<Value> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum FieldKind {
    Int,
    Float,
    Bool,
    Category,
}

pub(crate) fn field_kind(name: &str) -> Option<FieldKind> {
    Some(match name {
        "size" | "window" | "negative" | "iterations" | "seed" => FieldKind::Int,
        "alpha" | "subsample_t" | "lockf" | "retro" => FieldKind::Float,
        "hs" => FieldKind::Bool,
        "architecture" => FieldKind::Category,
        _ => return None,
    })
}

/// Normalize `value` to the JSON type of field `name`.
fn coerce(name: &str, value: &Value) -> Result<Value> {
    let kind = field_kind(name).ok_or_else(|| Error::config(format!("`{name}` is not a hyperparameter")))?;
    let bad = || Error::config(format!("`{value}` is not a valid value for `{name}`"));
    Ok(match kind {
        FieldKind::Int => {
            let x = value.as_f64().ok_or_else(bad)?;
            if x < 0.0 || x.fract() != 0.0 || x > u64::MAX as f64 {
                return Err(bad());
            }
            Value::from(x as u64)
        }
        FieldKind::Float => Value::from(value.as_f64().ok_or_else(bad)?),
        FieldKind::Bool => match value {
            Value::Bool(b) => Value::Bool(*b),
            v if v.as_f64() == Some(0.0) => Value::Bool(false),
            v if v.as_f64() == Some(1.0) => Value::Bool(true),
            _ => return Err(bad()),
        },
        FieldKind::Category => {
            let s = value.as_str().ok_or_else(bad)?;
            s.parse::<Architecture>().map_err(|_| bad())?;
            Value::from(s)
        }
    })
}

/// Sort key for "values ascending": numbers and booleans by value;
/// categories keep their declared order.
fn sort_values(name: &str, values: &mut [Value]) {
    match field_kind(name) {
        Some(FieldKind::Int | FieldKind::Float) => {
            values.sort_by(|a, b| a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()))
        }
        Some(FieldKind::Bool) => values.sort_by_key(|v| v.as_bool().unwrap()),
        _ => {}
    }
}

fn check_bounds(name: &str, min: f64, max: f64) -> Result<()> {
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(Error::config(format!("`{name}`: need finite min <= max, got {min} and {max}")));
    }
    Ok(())
}

impl SweepConfig {
    /// Parse a config file. Relative resource and corpus paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read sweep config {}: {e}", path.display())))?;
        let mut config: SweepConfig =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        let r = &mut self.resources;
        for p in [
            &mut r.pretrained,
            &mut r.lexicon,
            &mut r.triples,
            &mut r.documents,
            &mut r.analogies,
            &mut r.labels,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn corpus_id(&self) -> String {
        self.corpus_id.clone().unwrap_or_else(|| {
            self.corpus
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".to_string())
        })
    }

    /// Structural checks that do not need any file.
    pub fn validate(&self) -> Result<()> {
        for (name, spec) in &self.params {
            if field_kind(name).is_none() {
                return Err(Error::config(format!("`{name}` is not a hyperparameter")));
            }
            if self.fixed.contains_key(name) {
                return Err(Error::config(format!("`{name}` is both swept and fixed")));
            }
            match spec {
                ParamSpec::List(values) | ParamSpec::Dist(Distribution::Choice { values }) => {
                    if values.is_empty() {
                        return Err(Error::config(format!("`{name}` has no values")));
                    }
                    for v in values {
                        coerce(name, v)?;
                    }
                }
                ParamSpec::Range(r) => {
                    check_bounds(name, r.min, r.max)?;
                    if !(r.step > 0.0 && r.step.is_finite()) {
                        return Err(Error::config(format!("`{name}`: step must be positive")));
                    }
                    for v in r.values() {
                        coerce(name, &Value::from(v))?;
                    }
                }
                ParamSpec::Dist(Distribution::Uniform { min, max }) => check_bounds(name, *min, *max)?,
                ParamSpec::Dist(Distribution::LogUniform { min, max }) => {
                    check_bounds(name, *min, *max)?;
                    if *min <= 0.0 {
                        return Err(Error::config(format!("`{name}`: log-uniform needs min > 0")));
                    }
                }
            }
            if matches!(field_kind(name), Some(FieldKind::Bool | FieldKind::Category))
                && matches!(spec, ParamSpec::Range(_) | ParamSpec::Dist(Distribution::Uniform { .. } | Distribution::LogUniform { .. }))
            {
                return Err(Error::config(format!("`{name}` takes a list of values")));
            }
        }
        for (name, v) in &self.fixed {
            coerce(name, v)?;
        }
        if let Strategy::Random { n_samples: 0, .. } = self.strategy {
            return Err(Error::config("random strategy needs n_samples >= 1"));
        }
        Ok(())
    }

    fn base_point(&self) -> Map<String, Value> {
        let Value::Object(mut base) = serde_json::to_value(HyperParams::default()).expect("serializable") else {
            unreachable!("HyperParams is a struct")
        };
        for (name, v) in &self.fixed {
            base.insert(name.clone(), coerce(name, v).expect("validated"));
        }
        base
    }

    /// Grid values of each swept parameter, in expansion order.
    fn grid_axes(&self) -> Result<Vec<(&str, Vec<Value>)>> {
        self.params
            .iter()
            .map(|(name, spec)| {
                let mut values: Vec<Value> = match spec {
                    ParamSpec::List(vs) | ParamSpec::Dist(Distribution::Choice { values: vs }) => {
                        vs.iter().map(|v| coerce(name, v)).collect::<Result<_>>()?
                    }
                    ParamSpec::Range(r) => r
                        .values()
                        .into_iter()
                        .map(|v| coerce(name, &Value::from(v)))
                        .collect::<Result<_>>()?,
                    ParamSpec::Dist(_) => {
                        return Err(Error::config(format!(
                            "`{name}` is a continuous distribution; use the random strategy"
                        )))
                    }
                };
                sort_values(name, &mut values);
                Ok((name.as_str(), values))
            })
            .collect()
    }

    fn sample(&self, name: &str, spec: &ParamSpec, rng: &mut ChaCha8Rng) -> Result<Value> {
        let pick = |values: &[Value], rng: &mut ChaCha8Rng| values[rng.random_range(0..values.len())].clone();
        let drawn = match spec {
            ParamSpec::List(vs) | ParamSpec::Dist(Distribution::Choice { values: vs }) => pick(vs, rng),
            ParamSpec::Range(r) => Value::from(pick(&r.values().into_iter().map(Value::from).collect::<Vec<_>>(), rng)),
            ParamSpec::Dist(Distribution::Uniform { min, max }) => Value::from(min + (max - min) * rng.random::<f64>()),
            ParamSpec::Dist(Distribution::LogUniform { min, max }) => {
                Value::from((min.ln() + (max.ln() - min.ln()) * rng.random::<f64>()).exp())
            }
        };
        match (field_kind(name), drawn.as_f64()) {
            (Some(FieldKind::Int), Some(x)) => coerce(name, &Value::from(x.round())),
            _ => coerce(name, &drawn),
        }
    }
}

fn finish(point: Map<String, Value>) -> Result<HyperParams> {
    let hyper: HyperParams = serde_json::from_value(Value::Object(point)).map_err(|e| Error::config(e.to_string()))?;
    hyper.validate()?;
    Ok(hyper)
}

/// The points of a sweep. Grid points are the Cartesian product with the
/// first declared parameter varying slowest and each parameter's values
/// ascending; random points are drawn parameter by parameter from `seed`.
pub fn expand(config: &SweepConfig) -> Result<Vec<HyperParams>> {
    config.validate()?;
    let base = config.base_point();
    match &config.strategy {
        Strategy::Grid => {
            let axes = config.grid_axes()?;
            let total: usize = axes.iter().map(|(_, v)| v.len()).product();
            if total == 0 {
                return Err(Error::config("the grid is empty"));
            }
            let mut out = Vec::with_capacity(total);
            let mut idx = vec![0usize; axes.len()];
            for _ in 0..total {
                let mut point = base.clone();
                for ((name, values), &i) in axes.iter().zip(&idx) {
                    point.insert(name.to_string(), values[i].clone());
                }
                out.push(finish(point)?);
                // Odometer increment, last axis fastest.
                for a in (0..axes.len()).rev() {
                    idx[a] += 1;
                    if idx[a] < axes[a].1.len() {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            Ok(out)
        }
        Strategy::Random { n_samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*n_samples)
                .map(|_| {
                    let mut point = base.clone();
                    for (name, spec) in &config.params {
                        point.insert(name.clone(), config.sample(name, spec, &mut rng)?);
                    }
                    finish(point)
                })
                .collect()
        }
    }
}

/// A finer sweep around `center`: each numeric range shrinks to one old
/// step either side with half the step; numeric lists become the center and
/// the midpoints to its neighbors; continuous distributions narrow to half
/// their width (log-width for log-uniform); categorical parameters are
/// fixed at the center's value.
pub fn refine(config: &SweepConfig, center: &HyperParams) -> Result<SweepConfig> {
    config.validate()?;
    let Value::Object(c) = serde_json::to_value(center)? else {
        unreachable!("HyperParams is a struct")
    };
    let mut out = config.clone();
    out.params.clear();
    for (name, spec) in &config.params {
        let kind = field_kind(name).expect("validated");
        let cv = &c[name.as_str()];
        if matches!(kind, FieldKind::Bool | FieldKind::Category) {
            out.fixed.insert(name.clone(), cv.clone());
            continue;
        }
        let x = cv.as_f64().expect("numeric field");
        let round = |v: f64| if kind == FieldKind::Int { v.round() } else { v };
        let new_spec = match spec {
            ParamSpec::Range(r) => {
                let mut step = r.step / 2.0;
                if kind == FieldKind::Int {
                    step = step.round().max(1.0);
                }
                ParamSpec::Range(RangeSpec {
                    min: (x - r.step).max(r.min),
                    max: (x + r.step).min(r.max),
                    step,
                })
            }
            ParamSpec::List(vs) | ParamSpec::Dist(Distribution::Choice { values: vs }) => {
                let mut sorted: Vec<f64> = vs.iter().filter_map(Value::as_f64).collect();
                sorted.sort_by(f64::total_cmp);
                let below = sorted.iter().rev().find(|&&v| v < x);
                let above = sorted.iter().find(|&&v| v > x);
                let mut values = vec![x];
                values.extend(below.map(|b| round((b + x) / 2.0)));
                values.extend(above.map(|a| round((a + x) / 2.0)));
                values.sort_by(f64::total_cmp);
                values.dedup();
                ParamSpec::List(values.into_iter().map(|v| coerce(name, &Value::from(v))).collect::<Result<_>>()?)
            }
            ParamSpec::Dist(Distribution::Uniform { min, max }) => {
                let half = (max - min) / 4.0;
                ParamSpec::Dist(Distribution::Uniform {
                    min: (x - half).max(*min),
                    max: (x + half).min(*max),
                })
            }
            ParamSpec::Dist(Distribution::LogUniform { min, max }) => {
                let factor = (max / min).powf(0.25);
                ParamSpec::Dist(Distribution::LogUniform {
                    min: (x / factor).max(*min),
                    max: (x * factor).min(*max),
                })
            }
        };
        out.params.insert(name.clone(), new_spec);
    }
    out.validate()?;
    Ok(out)
}
