//! Threshold decoding and the prediction file.
//!
//! A triple `(span_i, r_k, span_j)` is emitted exactly when its link
//! probability is strictly greater than the threshold.
//!
//! Prediction files are JSON:
//!
//! ```text
//! {"format": "triplink-predictions", "version": 1, "records": [
//! {"id": "...", "text": "...", "triples": [{"head_text": "...", "head_span": [s, e],
//!   "relation_name": "...", "tail_span": [s, e], "tail_text": "...", "score": p,
//!   "head_offsets": [b, e], "tail_offsets": [b, e]}, ...]},
//! ...
//! ]}
//! ```
//!
//! Spans are inclusive subword indices; offsets are UTF-8 byte intervals
//! `[start, end)` into `text`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::inference_set;
use crate::corpus::{RelationSchema, Sentence, Span};
use crate::error::{Error, Result};
use crate::linker::LinkScoreTensor;
use crate::model::Model;

pub const PREDICTION_FORMAT: &str = "triplink-predictions";
pub const PREDICTION_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedTriple {
    pub head: Span,
    pub relation: usize,
    pub tail: Span,
    pub score: f64,
}

impl PredictedTriple {
    fn key(&self) -> (Span, usize, Span) {
        (self.head, self.relation, self.tail)
    }
}

pub fn check_threshold(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must lie in (0, 1), got {theta}")))
    }
}

/// Every cell with probability `> theta`, in canonical
/// `(head.start, head.end, relation, tail.start, tail.end)` order.
pub fn decode(scores: &LinkScoreTensor, spans: &[Span], theta: f64) -> Result<Vec<PredictedTriple>> {
    check_threshold(theta)?;
    let (n, _, m) = scores.probs.dim();
    if n != spans.len() || m != spans.len() {
        return Err(Error::Shape(format!("score tensor is {n}x{m}, span table has {}", spans.len())));
    }
    let mut out: Vec<PredictedTriple> = scores
        .probs
        .indexed_iter()
        .filter(|(_, &p)| p > theta)
        .map(|((i, k, j), &p)| PredictedTriple { head: spans[i], relation: k, tail: spans[j], score: p })
        .collect();
    out.sort_by_key(PredictedTriple::key);
    Ok(out)
}

/// Enumerate, encode, score and decode one sentence in a single pass.
pub fn predict_sentence(sentence: &Sentence, model: &Model, max_len: usize, theta: f64) -> Result<Vec<PredictedTriple>> {
    let candidates = inference_set(sentence, max_len)?;
    let scores = model.score_spans(&sentence.token_ids, &candidates.spans)?;
    decode(&scores, &candidates.spans, theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub head_text: String,
    pub head_span: Span,
    pub relation_name: String,
    pub tail_span: Span,
    pub tail_text: String,
    pub score: f64,
    pub head_offsets: [usize; 2],
    pub tail_offsets: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub text: String,
    pub triples: Vec<PredictionEntry>,
}

impl PredictionRecord {
    pub fn new(sentence: &Sentence, triples: &[PredictedTriple], schema: &RelationSchema) -> Self {
        let triples = triples
            .iter()
            .map(|t| {
                let (hs, he) = sentence.span_bytes(t.head);
                let (ts, te) = sentence.span_bytes(t.tail);
                PredictionEntry {
                    head_text: sentence.span_text(t.head).to_string(),
                    head_span: t.head,
                    relation_name: schema.name(t.relation).to_string(),
                    tail_span: t.tail,
                    tail_text: sentence.span_text(t.tail).to_string(),
                    score: t.score,
                    head_offsets: [hs, he],
                    tail_offsets: [ts, te],
                }
            })
            .collect();
        PredictionRecord { id: sentence.id.clone(), text: sentence.text.clone(), triples }
    }
}

#[derive(Serialize, Deserialize)]
struct PredictionFile {
    format: String,
    version: u32,
    records: Vec<PredictionRecord>,
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{{\"format\": \"{PREDICTION_FORMAT}\", \"version\": {PREDICTION_VERSION}, \"records\": [")?;
    for (i, r) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, r)?;
        out.extend_from_slice(if i + 1 < records.len() { b",\n" } else { b"\n" });
    }
    out.extend_from_slice(b"]}\n");
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let file: PredictionFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.format != PREDICTION_FORMAT || file.version != PREDICTION_VERSION {
        return Err(Error::Config(format!(
            "unsupported prediction file {} v{} (expected {PREDICTION_FORMAT} v{PREDICTION_VERSION})",
            file.format, file.version
        )));
    }
    Ok(file.records)
}
