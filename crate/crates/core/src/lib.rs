//! Training, scoring and comparing populations of word-embedding models.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hyper;
pub mod sweep;
pub mod trainer;

pub use error::{Error, Result};
