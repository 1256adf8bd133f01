//! Templated synthetic corpora with known gold triples.
//!
//! Sentences are assembled from clause templates over a closed inventory of
//! multi-word entity names. Each sentence is built to exhibit exactly one
//! overlap pattern, and pattern counts follow the requested mix by quota.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loader::{align_records, LoadOptions, RawRecord};
use super::pattern::classify_pattern;
use super::tokenizer::{Tokenizer, Vocab};
use super::{RelationSchema, Sentence};
use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRng};

const RELATIONS: [(&str, &str); 8] = [
    ("leader_of", "leads"),
    ("founder_of", "founded"),
    ("located_in", "lies in"),
    ("part_of", "belongs to"),
    ("member_of", "joined"),
    ("born_in", "was born in"),
    ("capital_of", "governs"),
    ("owner_of", "owns"),
];
const MODIFIERS: [&str; 5] = ["new", "old", "north", "south", "greater"];
const PREFIXES: [&str; 4] = ["reportedly", "yesterday", "sources say that", "as expected"];
const JOINERS: [&str; 3] = [";", "while", "and meanwhile"];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Requested share of each pattern; must sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternMix {
    pub normal: f64,
    pub epo: f64,
    pub seo: f64,
    pub hto: f64,
}

impl PatternMix {
    pub const NORMAL_ONLY: PatternMix = PatternMix { normal: 1.0, epo: 0.0, seo: 0.0, hto: 0.0 };
    pub const UNIFORM: PatternMix = PatternMix { normal: 0.25, epo: 0.25, seo: 0.25, hto: 0.25 };

    fn weights(&self) -> [f64; 4] {
        [self.normal, self.epo, self.seo, self.hto]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub sentences: usize,
    /// Size of the closed entity inventory.
    pub entities: usize,
    /// Size of the word pool entity names are drawn from (no word is shared
    /// between two entities).
    pub vocab_size: usize,
    pub relations: usize,
    pub max_entity_words: usize,
    pub mix: PatternMix,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sentences: 1000,
            entities: 40,
            vocab_size: 96,
            relations: 6,
            max_entity_words: 1,
            mix: PatternMix::UNIFORM,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynthPattern {
    Normal,
    Epo,
    Seo,
    Hto,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub records: Vec<RawRecord>,
    pub sentences: Vec<Sentence>,
    pub patterns: Vec<SynthPattern>,
    pub schema: RelationSchema,
    pub tokenizer: Tokenizer,
    pub entity_names: Vec<String>,
}

impl SyntheticCorpus {
    /// Longest gold entity in tokens that the generator can produce.
    pub fn max_entity_len(&self) -> usize {
        self.sentences
            .iter()
            .flat_map(|s| s.gold_triples.iter().flat_map(|t| [t.head.len(), t.tail.len()]))
            .max()
            .unwrap_or(0)
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    validate(config)?;
    let mut rng = seeded(config.seed);

    let schema = RelationSchema::new(
        (0..config.relations)
            .map(|k| RELATIONS.get(k).map_or_else(|| format!("relation_{k}"), |r| r.0.to_string()))
            .collect(),
    )?;
    let cues: Vec<String> = (0..config.relations)
        .map(|k| RELATIONS.get(k).map_or_else(|| format!("rel{k}s"), |r| r.1.to_string()))
        .collect();
    let entity_names = entity_inventory(config, &mut rng)?;

    let patterns = assign_patterns(config, &mut rng);
    let mut records = Vec::with_capacity(config.sentences);
    for (n, &pattern) in patterns.iter().enumerate() {
        let mut b = Builder::new(&mut rng, &entity_names, &cues, &schema);
        match pattern {
            SynthPattern::Normal => b.normal(),
            SynthPattern::Epo => b.epo(),
            SynthPattern::Seo => b.seo(),
            SynthPattern::Hto => b.hto(),
        }
        records.push(b.finish(format!("synth-{n}")));
    }

    let words: BTreeSet<&str> = records.iter().flat_map(|r| r.text.split_whitespace()).collect();
    let tokenizer = Tokenizer::new(Vocab::from_pieces(words));
    let ds = align_records(&records, &tokenizer, LoadOptions::default(), Some(&schema))?;
    if ds.sentences.len() != records.len() {
        return Err(Error::Config(format!("synthetic alignment lost sentences: {:?}", ds.report)));
    }
    for (s, &p) in ds.sentences.iter().zip(&patterns) {
        let l = classify_pattern(s);
        let ok = match p {
            SynthPattern::Normal => l.is_normal,
            SynthPattern::Epo => l.has_epo && !l.has_seo && !l.has_hto,
            SynthPattern::Seo => l.has_seo && !l.has_epo && !l.has_hto,
            SynthPattern::Hto => l.has_hto && !l.has_epo && !l.has_seo,
        };
        debug_assert!(ok, "sentence {} built as {p:?} classified as {l:?}", s.id);
        if !ok {
            return Err(Error::Config(format!("sentence {} does not exhibit {p:?}", s.id)));
        }
    }
    Ok(SyntheticCorpus { records, sentences: ds.sentences, patterns, schema, tokenizer, entity_names })
}

fn validate(c: &SyntheticConfig) -> Result<()> {
    let w = c.mix.weights();
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("pattern proportions must be non-negative and sum to 1, got {w:?}")));
    }
    if c.relations == 0 {
        return Err(Error::Config("at least one relation is required".into()));
    }
    if c.mix.epo > 0.0 && c.relations < 2 {
        return Err(Error::Config("entity pair overlap needs at least two relations".into()));
    }
    if c.entities < 4 {
        return Err(Error::Config("at least four entities are required".into()));
    }
    if c.vocab_size < c.entities {
        return Err(Error::Config(format!("vocabulary size {} is smaller than entity count {}", c.vocab_size, c.entities)));
    }
    if c.max_entity_words == 0 {
        return Err(Error::Config("max_entity_words must be positive".into()));
    }
    Ok(())
}

fn entity_inventory(c: &SyntheticConfig, rng: &mut StreamRng) -> Result<Vec<String>> {
    let reserved: BTreeSet<&str> = RELATIONS
        .iter()
        .flat_map(|r| r.1.split(' '))
        .chain(MODIFIERS)
        .chain(PREFIXES.iter().flat_map(|p| p.split(' ')))
        .chain(JOINERS.iter().flat_map(|p| p.split(' ')))
        .chain(["and", "which", ","])
        .collect();
    let mut all: Vec<String> = Vec::new();
    for &c1 in CONSONANTS {
        for &v1 in VOWELS {
            for &c2 in CONSONANTS {
                for &v2 in VOWELS {
                    let w = String::from_utf8(vec![c1, v1, c2, v2]).expect("ascii");
                    if !reserved.contains(w.as_str()) {
                        all.push(w);
                    }
                }
            }
        }
    }
    all.shuffle(rng);
    all.truncate(c.vocab_size);
    let mut pool = all.into_iter();
    let mut names = Vec::with_capacity(c.entities);
    for _ in 0..c.entities {
        let n = rng.gen_range(1..=c.max_entity_words);
        let words: Vec<String> = pool.by_ref().take(n).collect();
        if words.len() < n {
            return Err(Error::Config(format!(
                "word pool of {} exhausted after {} entities; raise vocab_size",
                c.vocab_size,
                names.len()
            )));
        }
        names.push(words.join(" "));
    }
    Ok(names)
}

/// Largest-remainder quotas, shuffled into sentence order.
fn assign_patterns(c: &SyntheticConfig, rng: &mut StreamRng) -> Vec<SynthPattern> {
    let kinds = [SynthPattern::Normal, SynthPattern::Epo, SynthPattern::Seo, SynthPattern::Hto];
    let w = c.mix.weights();
    let exact: Vec<f64> = w.iter().map(|x| x * c.sentences as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut missing = c.sentences - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if w[i] > 0.0 {
            counts[i] += 1;
            missing -= 1;
        }
    }
    let mut out: Vec<SynthPattern> = kinds.iter().zip(&counts).flat_map(|(&k, &n)| std::iter::repeat_n(k, n)).collect();
    out.shuffle(rng);
    out
}

struct Builder<'a> {
    rng: &'a mut StreamRng,
    names: &'a [String],
    cues: &'a [String],
    schema: &'a RelationSchema,
    used: BTreeSet<usize>,
    words: Vec<String>,
    triples: Vec<(String, String, String)>,
}

impl<'a> Builder<'a> {
    fn new(rng: &'a mut StreamRng, names: &'a [String], cues: &'a [String], schema: &'a RelationSchema) -> Self {
        let mut b = Builder { rng, names, cues, schema, used: BTreeSet::new(), words: Vec::new(), triples: Vec::new() };
        if b.rng.gen_bool(0.3) {
            let p = PREFIXES[b.rng.gen_range(0..PREFIXES.len())];
            b.push(p);
        }
        b
    }

    fn push(&mut self, s: &str) {
        self.words.push(s.to_string());
    }

    fn entity(&mut self) -> String {
        loop {
            let i = self.rng.gen_range(0..self.names.len());
            if self.used.insert(i) {
                return self.names[i].clone();
            }
        }
    }

    fn relation(&mut self) -> usize {
        self.rng.gen_range(0..self.cues.len())
    }

    fn fact(&mut self, h: &str, k: usize, t: &str) {
        self.triples.push((h.to_string(), self.schema.name(k).to_string(), t.to_string()));
    }

    fn normal(&mut self) {
        let clauses = if self.rng.gen_bool(0.5) { 1 } else if self.rng.gen_bool(0.8) { 2 } else { 3 };
        for c in 0..clauses {
            if c > 0 {
                let j = JOINERS[self.rng.gen_range(0..JOINERS.len())];
                self.push(j);
            }
            let (h, t, k) = (self.entity(), self.entity(), self.relation());
            self.push(&h);
            let cue = self.cues[k].clone();
            self.push(&cue);
            self.push(&t);
            self.fact(&h, k, &t);
        }
    }

    fn epo(&mut self) {
        let (h, t) = (self.entity(), self.entity());
        let n = if self.rng.gen_bool(0.8) || self.cues.len() < 3 { 2 } else { 3 };
        let mut rels: Vec<usize> = (0..self.cues.len()).collect();
        rels.shuffle(self.rng);
        rels.truncate(n);
        self.push(&h);
        for (i, &k) in rels.iter().enumerate() {
            if i > 0 {
                self.push(if i + 1 == n { "and" } else { "," });
            }
            let cue = self.cues[k].clone();
            self.push(&cue);
            self.fact(&h, k, &t);
        }
        self.push(&t);
    }

    fn seo(&mut self) {
        let (a, b, c) = (self.entity(), self.entity(), self.entity());
        let (k1, k2) = (self.relation(), self.relation());
        let (cue1, cue2) = (self.cues[k1].clone(), self.cues[k2].clone());
        self.push(&a);
        self.push(&cue1);
        self.push(&b);
        self.fact(&a, k1, &b);
        if self.rng.gen_bool(0.5) {
            // shared head
            self.push("and");
            self.push(&cue2);
            self.push(&c);
            self.fact(&a, k2, &c);
        } else {
            // chain through the middle entity
            self.push(",");
            self.push("which");
            self.push(&cue2);
            self.push(&c);
            self.fact(&b, k2, &c);
        }
    }

    fn hto(&mut self) {
        let inner = self.entity();
        let m = MODIFIERS[self.rng.gen_range(0..MODIFIERS.len())];
        let head = format!("{m} {inner}");
        let k = self.relation();
        let cue = self.cues[k].clone();
        self.push(&head);
        self.push(&cue);
        self.fact(&head, k, &inner);
    }

    fn finish(mut self, id: String) -> RawRecord {
        self.push(".");
        RawRecord { id: Some(id), text: self.words.join(" "), triple_list: self.triples }
    }
}
