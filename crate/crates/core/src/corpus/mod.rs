//! Sentences, spans, relation schemas and everything needed to get a corpus
//! from disk (or from the synthetic generator) into aligned token spans.

mod loader;
mod pattern;
mod stats;
mod synth;
mod tokenizer;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loader::{
    align_records, load_dataset, read_records, write_records, AlignMode, Dataset, LoadOptions, LoadReport,
    RawRecord, MAX_SEQUENCE_LEN,
};
pub use pattern::{classify_pattern, CountBucket, PatternLabel};
pub(crate) use pattern::classify_triples;
pub use stats::{dataset_stats, DatasetStats};
pub use synth::{generate_synthetic, PatternMix, SyntheticConfig, SyntheticCorpus};
pub use tokenizer::{Tokenized, Tokenizer, Vocab, UNK_TOKEN};

/// Inclusive token interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("span start {start} exceeds end {end}")));
        }
        Ok(Span { start, end })
    }

    pub fn single(index: usize) -> Self {
        Span { start: index, end: index }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.start > self.end || self.end >= len {
            return Err(Error::SpanOutOfRange { start: self.start, end: self.end, len });
        }
        Ok(())
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span { start: v[0], end: v[1] }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Ordered set of relation names; relation `k` is `names[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RelationSchema {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl RelationSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("relation schema needs at least one relation".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (k, name) in names.iter().enumerate() {
            if index.insert(name.clone(), k).is_some() {
                return Err(Error::Config(format!("duplicate relation name {name:?}")));
            }
        }
        Ok(RelationSchema { names, index })
    }

    /// Number of relations (K).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

impl TryFrom<Vec<String>> for RelationSchema {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        RelationSchema::new(v)
    }
}

impl From<RelationSchema> for Vec<String> {
    fn from(s: RelationSchema) -> Self {
        s.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldTriple {
    pub head: Span,
    pub relation: usize,
    pub tail: Span,
}

/// A tokenized sentence with its gold triples aligned to subword spans.
///
/// `offsets[i]` is the UTF-8 byte interval `[start, end)` of token `i` in `text`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub token_ids: Vec<u32>,
    pub offsets: Vec<(usize, usize)>,
    pub gold_triples: Vec<GoldTriple>,
}

impl Sentence {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Surface text covered by a token span.
    pub fn span_text(&self, span: Span) -> &str {
        let (s, _) = self.offsets[span.start];
        let (_, e) = self.offsets[span.end];
        &self.text[s..e]
    }

    /// Byte interval covered by a token span.
    pub fn span_bytes(&self, span: Span) -> (usize, usize) {
        (self.offsets[span.start].0, self.offsets[span.end].1)
    }

    /// Distinct gold entity spans in first-appearance order (head before tail).
    pub fn gold_spans(&self) -> Vec<Span> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for t in &self.gold_triples {
            for s in [t.head, t.tail] {
                if seen.insert(s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Checks the structural invariants: non-empty, ordered non-overlapping
    /// offsets, gold spans within range and relations valid under `schema`.
    pub fn validate(&self, schema: &RelationSchema) -> Result<()> {
        let len = self.len();
        if len == 0 {
            return Err(Error::EmptyInput("sentence has no tokens"));
        }
        if self.token_ids.len() != len || self.offsets.len() != len {
            return Err(Error::Shape(format!(
                "sentence {}: {} tokens, {} ids, {} offsets",
                self.id,
                len,
                self.token_ids.len(),
                self.offsets.len()
            )));
        }
        for w in self.offsets.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::Config(format!("sentence {}: overlapping token offsets", self.id)));
            }
        }
        for t in &self.gold_triples {
            t.head.check_within(len)?;
            t.tail.check_within(len)?;
            if t.relation >= schema.len() {
                return Err(Error::Config(format!(
                    "sentence {}: relation index {} outside schema of size {}",
                    self.id,
                    t.relation,
                    schema.len()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_basics() {
        let s = Span::new(2, 4).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.intersects(&Span::single(4)));
        assert!(!s.intersects(&Span::single(5)));
        assert!(Span::new(3, 2).is_err());
        assert!(s.check_within(5).is_ok());
        assert!(s.check_within(4).is_err());
    }

    #[test]
    fn span_serializes_as_pair() {
        let s = Span { start: 1, end: 3 };
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3]");
        let back: Span = serde_json::from_str("[1,3]").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(RelationSchema::new(vec![]).is_err());
        assert!(RelationSchema::new(vec!["a".into(), "a".into()]).is_err());
        let s = RelationSchema::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.index_of("b"), Some(1));
        let json = serde_json::to_string(&s).unwrap();
        let back: RelationSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back.index_of("b"), Some(1));
    }
}
