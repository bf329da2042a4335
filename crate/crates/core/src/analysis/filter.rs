//! Brushing filters over the model population.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hyper::DimValue;

use super::{check_dimension, ModelSummary};

/// A constraint on one dimension. Serialized as `{"min": a, "max": b}` or
/// `{"one_of": [..]}`; categories match by label or ordinal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Constraint {
    Range { min: f64, max: f64 },
    OneOf { one_of: Vec<Value> },
}

impl Constraint {
    fn matches(&self, value: &DimValue) -> bool {
        match self {
            Constraint::Range { min, max } => (*min..=*max).contains(&value.as_f64()),
            Constraint::OneOf { one_of } => one_of.iter().any(|v| match (v, value) {
                (Value::String(s), DimValue::Category { label, .. }) => s == label,
                (Value::Bool(b), DimValue::Number(x)) => *x == if *b { 1.0 } else { 0.0 },
                (v, d) => v.as_f64() == Some(d.as_f64()),
            }),
        }
    }
}

/// Dimension name to constraint; a model matches when it satisfies all of
/// them. The empty spec matches everything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterSpec {
    pub constraints: BTreeMap<String, Constraint>,
}

impl FilterSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, constraint: Constraint) -> Self {
        self.constraints.insert(name.to_string(), constraint);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn validate(&self, population: &[ModelSummary]) -> Result<()> {
        for (name, c) in &self.constraints {
            check_dimension(population, name)?;
            if let Constraint::Range { min, max } = c {
                if !(min <= max) {
                    return Err(Error::config(format!("filter on `{name}`: min {min} exceeds max {max}")));
                }
            }
        }
        Ok(())
    }

    /// Whether `model` passes. A model without a value for a constrained
    /// metric does not.
    pub fn matches(&self, model: &ModelSummary) -> bool {
        self.constraints
            .iter()
            .all(|(name, c)| model.dimension(name).is_some_and(|v| c.matches(&v)))
    }
}

/// Ids of matching models, in population order.
pub fn filter_models(population: &[ModelSummary], spec: &FilterSpec) -> Result<Vec<String>> {
    spec.validate(population)?;
    Ok(population
        .iter()
        .filter(|m| spec.matches(m))
        .map(|m| m.model_id.clone())
        .collect())
}
