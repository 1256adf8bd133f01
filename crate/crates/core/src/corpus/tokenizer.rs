//! Greedy longest-match subword tokenizer.
//!
//! Text is split on whitespace, punctuation characters become words of their
//! own, and each word is segmented left to right into the longest pieces
//! present in the vocabulary. Continuation pieces carry a `##` prefix. A
//! character with no matching piece becomes [`UNK_TOKEN`] covering exactly
//! that character, so token offsets always tile the non-whitespace text.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "[UNK]";
const CONTINUATION: &str = "##";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    unk: u32,
}

impl Vocab {
    /// Builds a vocabulary from explicit pieces; `[UNK]` is always id 0.
    pub fn from_pieces<I, S>(pieces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![UNK_TOKEN.to_string()];
        let mut index = HashMap::new();
        index.insert(UNK_TOKEN.to_string(), 0);
        for p in pieces {
            let p = p.into();
            if !index.contains_key(&p) {
                index.insert(p.clone(), tokens.len() as u32);
                tokens.push(p);
            }
        }
        Vocab { tokens, index, unk: 0 }
    }

    /// Builds a vocabulary from raw texts: whole words by descending frequency
    /// (ties broken lexicographically), then single characters in both initial
    /// and continuation form, until `max_size` entries exist.
    pub fn build<'a, I>(texts: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words: HashMap<&str, usize> = HashMap::new();
        let mut chars: HashMap<char, usize> = HashMap::new();
        for text in texts {
            for (s, e) in pre_tokenize(text) {
                let w = &text[s..e];
                *words.entry(w).or_default() += 1;
                for c in w.chars() {
                    *chars.entry(c).or_default() += 1;
                }
            }
        }
        let mut words: Vec<(&str, usize)> = words.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut chars: Vec<(char, usize)> = chars.into_iter().collect();
        chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let budget = max_size.max(1) - 1;
        let char_pieces = chars.len() * 2;
        // Keep room for character pieces when possible so rare words still
        // segment instead of collapsing to [UNK].
        let word_budget = budget - char_pieces.min(budget / 2);
        let mut pieces: Vec<String> = Vec::with_capacity(budget);
        for (w, _) in words.iter().take(word_budget) {
            pieces.push((*w).to_string());
        }
        for (c, _) in &chars {
            if pieces.len() >= budget {
                break;
            }
            pieces.push(c.to_string());
            if pieces.len() >= budget {
                break;
            }
            pieces.push(format!("{CONTINUATION}{c}"));
        }
        for (w, _) in words.iter().skip(word_budget) {
            if pieces.len() >= budget {
                break;
            }
            pieces.push((*w).to_string());
        }
        Vocab::from_pieces(pieces)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    /// Reads a WordPiece-style vocabulary, one piece per line; ids follow line
    /// order, so a pretrained encoder's own `vocab.txt` keeps its ids.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let pieces: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        Vocab::try_from(pieces)
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;
    fn try_from(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("vocabulary piece {t:?} appears twice")));
            }
        }
        let unk = *index.get(UNK_TOKEN).ok_or_else(|| Error::Config("vocabulary has no [UNK] piece".into()))?;
        Ok(Vocab { tokens, index, unk })
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tokenized {
    pub tokens: Vec<String>,
    pub ids: Vec<u32>,
    /// Byte interval `[start, end)` of each token.
    pub offsets: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    vocab: Vocab,
}

impl Tokenizer {
    pub fn new(vocab: Vocab) -> Self {
        Tokenizer { vocab }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn tokenize(&self, text: &str) -> Result<Tokenized> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput("cannot tokenize empty text"));
        }
        let mut out = Tokenized { tokens: Vec::new(), ids: Vec::new(), offsets: Vec::new() };
        for (ws, we) in pre_tokenize(text) {
            self.segment_word(text, ws, we, &mut out);
        }
        Ok(out)
    }

    fn segment_word(&self, text: &str, ws: usize, we: usize, out: &mut Tokenized) {
        let mut pos = ws;
        let mut buf = String::new();
        while pos < we {
            let word = &text[pos..we];
            let mut matched = None;
            // Candidate ends on char boundaries, longest first.
            let ends: Vec<usize> = word
                .char_indices()
                .map(|(i, c)| i + c.len_utf8())
                .collect();
            for &end in ends.iter().rev() {
                buf.clear();
                if pos != ws {
                    buf.push_str(CONTINUATION);
                }
                buf.push_str(&word[..end]);
                if let Some(id) = self.vocab.id(&buf) {
                    matched = Some((id, end));
                    break;
                }
            }
            let (id, len) = matched.unwrap_or((self.vocab.unk, ends[0]));
            out.tokens.push(self.vocab.tokens[id as usize].clone());
            out.ids.push(id);
            out.offsets.push((pos, pos + len));
            pos += len;
        }
    }
}

/// Splits text into word byte ranges: whitespace separates words and every
/// punctuation character stands alone.
pub(crate) fn pre_tokenize(text: &str) -> Vec<(usize, usize)> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push((s, i));
            }
        } else if is_punct(c) {
            if let Some(s) = start.take() {
                words.push((s, i));
            }
            words.push((i, i + c.len_utf8()));
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push((s, text.len()));
    }
    words
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_ascii())
}
