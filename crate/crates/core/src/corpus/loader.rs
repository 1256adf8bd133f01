//! Dataset files: JSON array or newline-delimited JSON records of the form
//! `{"text": "...", "triple_list": [["head", "relation", "tail"], ...]}`.
//!
//! Entity surface strings are located in the text at token boundaries (first
//! occurrence wins) and mapped to subword spans.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::tokenizer::{Tokenized, Tokenizer, Vocab};
use super::{GoldTriple, RelationSchema, Sentence, Span};
use crate::error::{Error, Result};

pub const MAX_SEQUENCE_LEN: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    #[default]
    ExactSpan,
    /// Only the final word of each entity is annotated (NYT*/WebNLG* style).
    LastWord,
}

impl FromStr for AlignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-span" | "exact" => Ok(AlignMode::ExactSpan),
            "last-word" => Ok(AlignMode::LastWord),
            other => Err(Error::Config(format!("unknown match mode {other:?} (expected exact-span or last-word)"))),
        }
    }
}

impl std::fmt::Display for AlignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlignMode::ExactSpan => "exact-span",
            AlignMode::LastWord => "last-word",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub triple_list: Vec<(String, String, String)>,
}

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    pub mode: AlignMode,
    pub max_len: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { mode: AlignMode::ExactSpan, max_len: MAX_SEQUENCE_LEN }
    }
}

/// Counters for everything the loader tolerated instead of failing on.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    pub skipped_unalignable: usize,
    pub skipped_unknown_relation: usize,
    pub ambiguous_alignments: usize,
    pub truncated_sentences: usize,
    pub truncated_triples_dropped: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub schema: RelationSchema,
    pub report: LoadReport,
}

/// Parses records from file contents. Array and newline-delimited layouts are
/// both accepted; errors carry the 1-based line of the offending record.
pub fn parse_records(content: &str) -> Result<Vec<RawRecord>> {
    let trimmed = content.trim_start();
    if trimmed.starts_with('[') {
        let raws: Vec<&RawValue> = serde_json::from_str(content)
            .map_err(|e| Error::MalformedRecord { line: e.line(), message: e.to_string() })?;
        raws.into_iter()
            .map(|raw| {
                let offset = raw.get().as_ptr() as usize - content.as_ptr() as usize;
                let line = 1 + content[..offset].bytes().filter(|&b| b == b'\n').count();
                serde_json::from_str(raw.get()).map_err(|e| Error::MalformedRecord { line, message: e.to_string() })
            })
            .collect()
    } else {
        content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedRecord { line: i + 1, message: e.to_string() })
            })
            .collect()
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    parse_records(&fs::read_to_string(path)?)
}

/// Writes records as a JSON array with one record per line.
pub fn write_records(path: impl AsRef<Path>, records: &[RawRecord]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(b"[\n");
    for (i, r) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, r)?;
        out.extend_from_slice(if i + 1 < records.len() { b",\n" } else { b"\n" });
    }
    out.extend_from_slice(b"]\n");
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Builds a vocabulary from the file itself and aligns every record.
pub fn load_dataset(path: impl AsRef<Path>, mode: AlignMode, vocab_size: usize) -> Result<(Dataset, Tokenizer)> {
    let records = read_records(path)?;
    let tokenizer = Tokenizer::new(Vocab::build(records.iter().map(|r| r.text.as_str()), vocab_size));
    let opts = LoadOptions { mode, ..LoadOptions::default() };
    let ds = align_records(&records, &tokenizer, opts, None)?;
    Ok((ds, tokenizer))
}

/// Tokenizes records and aligns their triples.
///
/// With `schema = None` relations are collected in first-appearance order;
/// with a fixed schema, sentences mentioning other relations are skipped.
pub fn align_records(
    records: &[RawRecord],
    tokenizer: &Tokenizer,
    opts: LoadOptions,
    schema: Option<&RelationSchema>,
) -> Result<Dataset> {
    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let mut names: Vec<String> = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for r in records {
                for (_, rel, _) in &r.triple_list {
                    if seen.insert(rel.as_str()) {
                        names.push(rel.clone());
                    }
                }
            }
            if names.is_empty() {
                return Err(Error::Config("dataset contains no relations".into()));
            }
            RelationSchema::new(names)?
        }
    };

    let mut report = LoadReport { records: records.len(), ..LoadReport::default() };
    let mut sentences = Vec::with_capacity(records.len());
    'records: for (n, rec) in records.iter().enumerate() {
        let id = rec.id.clone().unwrap_or_else(|| n.to_string());
        let mut tok = tokenizer.tokenize(&rec.text).map_err(|e| Error::MalformedRecord {
            line: n + 1,
            message: format!("record {id}: {e}"),
        })?;
        let full_len = tok.tokens.len();
        if full_len > opts.max_len {
            report.truncated_sentences += 1;
        }
        let index = BoundaryIndex::new(&tok);

        let mut triples = Vec::with_capacity(rec.triple_list.len());
        for (h, rel, t) in &rec.triple_list {
            let Some(relation) = schema.index_of(rel) else {
                warn!("sentence {id}: relation {rel:?} not in schema, skipping sentence");
                report.skipped_unknown_relation += 1;
                continue 'records;
            };
            let mut ends = [Span::single(0); 2];
            for (slot, surface) in ends.iter_mut().zip([h, t]) {
                match align_entity(&rec.text, &tok, &index, surface, opts.mode) {
                    Some((span, ambiguous)) => {
                        if ambiguous {
                            report.ambiguous_alignments += 1;
                        }
                        *slot = span;
                    }
                    None => {
                        warn!("sentence {id}: entity {surface:?} not found at token boundaries, skipping sentence");
                        report.skipped_unalignable += 1;
                        continue 'records;
                    }
                }
            }
            let [head, tail] = ends;
            if head.end >= opts.max_len || tail.end >= opts.max_len {
                report.truncated_triples_dropped += 1;
                continue;
            }
            triples.push(GoldTriple { head, relation, tail });
        }

        if full_len > opts.max_len {
            tok.tokens.truncate(opts.max_len);
            tok.ids.truncate(opts.max_len);
            tok.offsets.truncate(opts.max_len);
        }
        sentences.push(Sentence {
            id,
            text: rec.text.clone(),
            tokens: tok.tokens,
            token_ids: tok.ids,
            offsets: tok.offsets,
            gold_triples: triples,
        });
    }
    Ok(Dataset { sentences, schema, report })
}

struct BoundaryIndex {
    starts: HashMap<usize, usize>,
    ends: HashMap<usize, usize>,
}

impl BoundaryIndex {
    fn new(tok: &Tokenized) -> Self {
        let mut starts = HashMap::with_capacity(tok.offsets.len());
        let mut ends = HashMap::with_capacity(tok.offsets.len());
        for (i, &(s, e)) in tok.offsets.iter().enumerate() {
            starts.insert(s, i);
            ends.insert(e, i);
        }
        BoundaryIndex { starts, ends }
    }
}

/// Locates `surface` in `text` at token boundaries. Returns the span of the
/// first occurrence and whether further occurrences exist.
fn align_entity(
    text: &str,
    tok: &Tokenized,
    index: &BoundaryIndex,
    surface: &str,
    mode: AlignMode,
) -> Option<(Span, bool)> {
    let surface = surface.trim();
    if surface.is_empty() {
        return None;
    }
    let mut hits = text.match_indices(surface).filter_map(|(b, _)| {
        let s = *index.starts.get(&b)?;
        let e = *index.ends.get(&(b + surface.len()))?;
        Some((b, s, e))
    });
    let (byte_start, s, e) = hits.next()?;
    let ambiguous = hits.next().is_some();
    let span = match mode {
        AlignMode::ExactSpan => Span { start: s, end: e },
        AlignMode::LastWord => {
            let last_word_byte = surface
                .char_indices()
                .filter(|(_, c)| c.is_whitespace())
                .map(|(i, c)| byte_start + i + c.len_utf8())
                .next_back()
                .unwrap_or(byte_start);
            let first = (s..=e).find(|&i| tok.offsets[i].0 >= last_word_byte).unwrap_or(e);
            Span { start: first, end: e }
        }
    };
    Some((span, ambiguous))
}
