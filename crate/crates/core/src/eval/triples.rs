use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Score;
use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;

pub const METRIC: &str = "f_T";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::format(format!("unknown split `{other}`"))),
        }
    }
}

/// An anchor word with one synonym and one antonym.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub anchor: String,
    pub synonym: String,
    pub antonym: String,
    pub split: Split,
}

impl Triple {
    pub fn new(anchor: &str, synonym: &str, antonym: &str, split: Split) -> Result<Self> {
        if anchor == synonym || anchor == antonym || synonym == antonym {
            return Err(Error::format(format!(
                "triple words must be distinct: {anchor} {synonym} {antonym}"
            )));
        }
        Ok(Triple {
            anchor: anchor.to_string(),
            synonym: synonym.to_string(),
            antonym: antonym.to_string(),
            split,
        })
    }
}

/// Parse `anchor<TAB>synonym<TAB>antonym<TAB>train|test` lines. Blank lines
/// and `#` comments are skipped.
pub fn read_triples<R: BufRead>(input: R) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::format(format!(
                "triples line {}: expected 4 tab-separated fields",
                lineno + 1
            )));
        }
        let lower: Vec<String> = fields[..3].iter().map(|w| w.to_lowercase()).collect();
        out.push(Triple::new(&lower[0], &lower[1], &lower[2], fields[3].parse()?)?);
    }
    Ok(out)
}

/// Mean over scorable triples of `cos(anchor, synonym) - cos(anchor, antonym)`.
/// Triples with a word missing from the model are skipped and counted.
pub fn triples_score(model: &EmbeddingModel, triples: &[Triple]) -> Result<Score> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for t in triples {
        let (Some(syn), Some(ant)) = (
            model.similarity(&t.anchor, &t.synonym),
            model.similarity(&t.anchor, &t.antonym),
        ) else {
            continue;
        };
        sum += syn - ant;
        used += 1;
    }
    let skipped = triples.len() - used;
    if used == 0 {
        return Err(Error::unavailable(
            METRIC,
            format!("all {skipped} triples have out-of-vocabulary words"),
        ));
    }
    Ok(Score {
        value: sum / used as f64,
        used,
        skipped,
    })
}
