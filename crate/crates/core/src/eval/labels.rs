//! User-supplied synonym/antonym pair labels.
//!
//! The store is versioned: every successful mutation bumps `version`, and
//! anything derived from the labels (triples, cached scores) is keyed by it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::triples::{Split, Triple};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Synonym,
    Antonym,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Synonym => "synonym",
            Relation::Antonym => "antonym",
        })
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synonym" => Ok(Relation::Synonym),
            "antonym" => Ok(Relation::Antonym),
            other => Err(Error::format(format!("unknown relation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabel {
    pub id: u64,
    pub word_a: String,
    pub word_b: String,
    pub relation: Relation,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

impl PairLabel {
    fn key(&self) -> (&str, &str) {
        unordered(&self.word_a, &self.word_b)
    }

    pub fn involves(&self, word: &str) -> bool {
        self.word_a == word || self.word_b == word
    }

    /// The other word of the pair, if `word` is one of them.
    pub fn partner(&self, word: &str) -> Option<&str> {
        if self.word_a == word {
            Some(&self.word_b)
        } else if self.word_b == word {
            Some(&self.word_a)
        } else {
            None
        }
    }
}

fn unordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelStore {
    version: u64,
    next_id: u64,
    #[serde(with = "entry_list")]
    entries: BTreeMap<u64, PairLabel>,
}

/// Entries serialize as a list in id order, mirroring the label file.
mod entry_list {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::PairLabel;

    pub fn serialize<S: Serializer>(map: &BTreeMap<u64, PairLabel>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, PairLabel>, D::Error> {
        let list = Vec::<PairLabel>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for l in list {
            let id = l.id;
            if map.insert(id, l).is_some() {
                return Err(D::Error::custom(format!("duplicate label id {id}")));
            }
        }
        Ok(map)
    }
}

impl LabelStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// False for a deserialized store whose ids could collide with future
    /// additions.
    pub fn is_consistent(&self) -> bool {
        self.entries.iter().all(|(&k, l)| k == l.id && k <= self.next_id)
    }

    pub fn get(&self, id: u64) -> Option<&PairLabel> {
        self.entries.get(&id)
    }

    /// Labels in id (creation) order.
    pub fn list_labels(&self) -> Vec<PairLabel> {
        self.entries.values().cloned().collect()
    }

    fn check_conflict(&self, a: &str, b: &str, relation: Relation, ignore: Option<u64>) -> Result<()> {
        let key = unordered(a, b);
        if let Some(existing) = self
            .entries
            .values()
            .find(|l| Some(l.id) != ignore && l.key() == key)
        {
            let msg = if existing.relation == relation {
                format!("{} / {} is already labeled {relation} (id {})", a, b, existing.id)
            } else {
                format!(
                    "{} / {} is already labeled {} (id {}), cannot also be {relation}",
                    a, b, existing.relation, existing.id
                )
            };
            return Err(Error::Conflict(msg));
        }
        Ok(())
    }

    fn normalize(a: &str, b: &str, known: &dyn Fn(&str) -> bool) -> Result<(String, String)> {
        let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
        if a.is_empty() || b.is_empty() {
            return Err(Error::Query {
                message: "label words must be non-empty".into(),
                token: None,
            });
        }
        if a == b {
            return Err(Error::Query {
                message: format!("cannot label `{a}` against itself"),
                token: Some(a),
            });
        }
        for w in [&a, &b] {
            if !known(w) {
                return Err(Error::oov(w));
            }
        }
        Ok((a, b))
    }

    /// Add a pair label. `known` decides which words are in the active
    /// vocabulary.
    pub fn add_label(
        &mut self,
        word_a: &str,
        word_b: &str,
        relation: Relation,
        known: &dyn Fn(&str) -> bool,
    ) -> Result<PairLabel> {
        let (a, b) = Self::normalize(word_a, word_b, known)?;
        self.check_conflict(&a, &b, relation, None)?;
        self.next_id += 1;
        let label = PairLabel {
            id: self.next_id,
            word_a: a,
            word_b: b,
            relation,
            created_at: now(),
        };
        self.entries.insert(label.id, label.clone());
        self.version += 1;
        Ok(label)
    }

    pub fn update_label(
        &mut self,
        id: u64,
        word_a: &str,
        word_b: &str,
        relation: Relation,
        known: &dyn Fn(&str) -> bool,
    ) -> Result<PairLabel> {
        if !self.entries.contains_key(&id) {
            return Err(Error::NotFound(format!("label {id}")));
        }
        let (a, b) = Self::normalize(word_a, word_b, known)?;
        self.check_conflict(&a, &b, relation, Some(id))?;
        let label = self.entries.get_mut(&id).unwrap();
        label.word_a = a;
        label.word_b = b;
        label.relation = relation;
        let label = label.clone();
        self.version += 1;
        Ok(label)
    }

    pub fn delete_label(&mut self, id: u64) -> Result<PairLabel> {
        let removed = self
            .entries
            .remove(&id)
            .ok_or_else(|| Error::NotFound(format!("label {id}")))?;
        self.version += 1;
        Ok(removed)
    }

    /// Join synonym and antonym pairs that share a word into triples with
    /// that word as anchor. Output is sorted and free of duplicates.
    pub fn labels_to_triples(&self) -> Vec<Triple> {
        let mut synonyms: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut antonyms: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for l in self.entries.values() {
            let map = match l.relation {
                Relation::Synonym => &mut synonyms,
                Relation::Antonym => &mut antonyms,
            };
            map.entry(&l.word_a).or_default().push(&l.word_b);
            map.entry(&l.word_b).or_default().push(&l.word_a);
        }
        let mut out = Vec::new();
        for (anchor, syns) in &synonyms {
            let Some(ants) = antonyms.get(anchor) else { continue };
            for s in syns {
                for a in ants {
                    if let Ok(t) = Triple::new(anchor, s, a, Split::Train) {
                        out.push(t);
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Write `word_a<TAB>word_b<TAB>relation` lines in id order.
    pub fn write_label_file<W: Write>(&self, mut out: W) -> Result<()> {
        for l in self.entries.values() {
            writeln!(out, "{}\t{}\t{}", l.word_a, l.word_b, l.relation)?;
        }
        Ok(())
    }

    /// Read a label file into a fresh store. Conflicting lines are errors.
    pub fn read_label_file<R: BufRead>(input: R) -> Result<Self> {
        let mut store = LabelStore::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [a, b, rel] = fields[..] else {
                return Err(Error::format(format!(
                    "label line {}: expected word_a<TAB>word_b<TAB>synonym|antonym",
                    lineno + 1
                )));
            };
            store.add_label(a, b, rel.trim().parse()?, &|_| true)?;
        }
        Ok(store)
    }
}
