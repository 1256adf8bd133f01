//! Extraction metrics and analyses.
//!
//! Triples are compared by surface text: a predicted triple is correct when
//! its head text, relation name and tail text equal a gold triple's. In
//! last-word mode only the final word of each entity is compared. Per
//! sentence, predicted and gold triples are treated as sets.
//!
//! Sub-task scores relax the comparison to entity pairs `(h, t)` or to
//! relations `r`. Both are counted as multisets drawn from the deduplicated
//! triples, so a relaxed score can never fall below the full-triple score.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{AlignMode, CountBucket, GoldTriple, PatternLabel, RawRecord, RelationSchema, Sentence, Span};
use crate::decoder::{predict_sentence, PredictedTriple, PredictionRecord};
use crate::error::{Error, Result};
use crate::model::Model;

/// An entity mention: surface text plus, when known, its byte interval.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub text: String,
    pub offsets: Option<(usize, usize)>,
}

impl Mention {
    fn key(&self, mode: AlignMode) -> String {
        let words: Vec<&str> = self.text.split_whitespace().collect();
        match mode {
            AlignMode::ExactSpan => words.join(" "),
            AlignMode::LastWord => words.last().copied().unwrap_or("").to_string(),
        }
    }

    fn overlaps(&self, other: &Mention) -> bool {
        match (self.offsets, other.offsets) {
            (Some((a0, a1)), Some((b0, b1))) => a0 < b1 && b0 < a1,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub head: Mention,
    pub relation: String,
    pub tail: Mention,
}

/// Gold and predicted triples of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSentence {
    pub id: String,
    pub gold: Vec<TripleRecord>,
    pub pred: Vec<TripleRecord>,
}

fn mention(sentence: &Sentence, span: Span) -> Mention {
    let (s, e) = sentence.span_bytes(span);
    Mention { text: sentence.text[s..e].to_string(), offsets: Some((s, e)) }
}

impl EvalSentence {
    /// Builds the comparison for an aligned sentence and span-level predictions.
    pub fn from_spans(sentence: &Sentence, predictions: &[PredictedTriple], schema: &RelationSchema) -> Self {
        let gold = sentence
            .gold_triples
            .iter()
            .map(|t| TripleRecord {
                head: mention(sentence, t.head),
                relation: schema.name(t.relation).to_string(),
                tail: mention(sentence, t.tail),
            })
            .collect();
        let pred = predictions
            .iter()
            .map(|t| TripleRecord {
                head: mention(sentence, t.head),
                relation: schema.name(t.relation).to_string(),
                tail: mention(sentence, t.tail),
            })
            .collect();
        EvalSentence { id: sentence.id.clone(), gold, pred }
    }
}

/// Gold triples of a raw dataset record, located by first occurrence at word
/// boundaries. Entities that cannot be located keep `offsets = None`.
pub fn gold_from_record(record: &RawRecord, mode: AlignMode) -> Vec<TripleRecord> {
    let locate = |surface: &str| -> Mention {
        let surface = surface.trim();
        let found = record.text.match_indices(surface).map(|(b, _)| (b, b + surface.len())).find(|&(s, e)| {
            let before = record.text[..s].chars().next_back();
            let after = record.text[e..].chars().next();
            let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
            !surface.is_empty() && boundary(before) && boundary(after)
        });
        match (mode, found) {
            (AlignMode::LastWord, Some((s, e))) => {
                let ls = surface.rfind(char::is_whitespace).map_or(s, |i| s + i + 1);
                Mention { text: record.text[ls..e].to_string(), offsets: Some((ls, e)) }
            }
            (_, offsets) => Mention { text: surface.to_string(), offsets },
        }
    };
    record
        .triple_list
        .iter()
        .map(|(h, r, t)| TripleRecord { head: locate(h), relation: r.clone(), tail: locate(t) })
        .collect()
}

pub fn pred_from_record(record: &PredictionRecord) -> Vec<TripleRecord> {
    record
        .triples
        .iter()
        .map(|t| TripleRecord {
            head: Mention { text: t.head_text.clone(), offsets: Some((t.head_offsets[0], t.head_offsets[1])) },
            relation: t.relation_name.clone(),
            tail: Mention { text: t.tail_text.clone(), offsets: Some((t.tail_offsets[0], t.tail_offsets[1])) },
        })
        .collect()
}

/// Pairs gold and predicted sentences by id; any orphan on either side is an error.
pub fn pair_by_id(
    gold: Vec<(String, Vec<TripleRecord>)>,
    pred: Vec<(String, Vec<TripleRecord>)>,
) -> Result<Vec<EvalSentence>> {
    let mut pred_map: HashMap<String, Vec<TripleRecord>> = HashMap::with_capacity(pred.len());
    let mut unknown = Vec::new();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    for (id, p) in pred {
        if !gold_ids.contains(id.as_str()) {
            unknown.push(id);
        } else {
            pred_map.insert(id, p);
        }
    }
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        match pred_map.remove(&id) {
            Some(p) => out.push(EvalSentence { id, gold: g, pred: p }),
            None => missing.push(id),
        }
    }
    if !missing.is_empty() || !unknown.is_empty() {
        return Err(Error::OrphanIds { missing_predictions: missing, unknown_predictions: unknown });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn merge(self, o: Counts) -> Counts {
        Counts { matched: self.matched + o.matched, predicted: self.predicted + o.predicted, gold: self.gold + o.gold }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_split: BTreeMap<String, EvalReport>,
}

impl EvalReport {
    /// P and R are 0 when their denominators are 0; F1 is 0 when P + R = 0.
    pub fn from_counts(counts: Counts) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(counts.matched, counts.predicted);
        let recall = ratio(counts.matched, counts.gold);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        EvalReport { precision, recall, f1, counts, per_split: BTreeMap::new() }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>7} {:>7} {:>7} {:>8} {:>8} {:>8}", "split", "Prec.", "Rec.", "F1", "matched", "pred", "gold")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, r: &EvalReport| {
            writeln!(
                f,
                "{:<10} {:>7.2} {:>7.2} {:>7.2} {:>8} {:>8} {:>8}",
                name,
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1,
                r.counts.matched,
                r.counts.predicted,
                r.counts.gold
            )
        };
        row(f, "all", self)?;
        for name in SPLIT_ORDER {
            if let Some(r) = self.per_split.get(*name) {
                row(f, name, r)?;
            }
        }
        Ok(())
    }
}

pub const SPLIT_ORDER: &[&str] = &["Normal", "EPO", "SEO", "HTO", "N=1", "N=2", "N=3", "N=4", "N>=5"];

type TripleKey = (String, String, String);

fn triple_keys(triples: &[TripleRecord], mode: AlignMode) -> BTreeSet<TripleKey> {
    triples.iter().map(|t| (t.head.key(mode), t.relation.clone(), t.tail.key(mode))).collect()
}

fn sentence_counts(s: &EvalSentence, mode: AlignMode) -> Counts {
    let g = triple_keys(&s.gold, mode);
    let p = triple_keys(&s.pred, mode);
    Counts { matched: g.intersection(&p).count(), predicted: p.len(), gold: g.len() }
}

/// Micro-averaged precision, recall and F1 over all sentences.
pub fn micro_prf(sentences: &[EvalSentence], mode: AlignMode) -> EvalReport {
    let total = sentences.iter().map(|s| sentence_counts(s, mode)).fold(Counts::default(), Counts::merge);
    EvalReport::from_counts(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitBy {
    Pattern,
    TripleCount,
}

/// Pattern label of a sentence computed from its gold records.
pub fn gold_label(s: &EvalSentence, mode: AlignMode) -> PatternLabel {
    // Identify entities by byte interval when known, by text otherwise, and
    // map them onto synthetic spans so the span-based classifier applies.
    let mut ids: HashMap<(String, Option<(usize, usize)>), Span> = HashMap::new();
    let mut next = 1_000_000usize;
    let mut to_span = |m: &Mention| -> Span {
        let key = (m.key(mode), m.offsets);
        *ids.entry(key).or_insert_with(|| match m.offsets {
            Some((a, b)) => Span { start: a, end: b.saturating_sub(1).max(a) },
            None => {
                next += 2;
                Span::single(next)
            }
        })
    };
    let mut relations: HashMap<&str, usize> = HashMap::new();
    let triples: Vec<GoldTriple> = s
        .gold
        .iter()
        .map(|t| {
            let n = relations.len();
            let relation = *relations.entry(t.relation.as_str()).or_insert(n);
            GoldTriple { head: to_span(&t.head), relation, tail: to_span(&t.tail) }
        })
        .collect();
    crate::corpus::classify_triples(&triples)
}

/// Micro scores per split. Pattern splits overlap; count splits partition.
pub fn split_report(sentences: &[EvalSentence], split_by: SplitBy, mode: AlignMode) -> EvalReport {
    let mut report = micro_prf(sentences, mode);
    let mut buckets: BTreeMap<String, Counts> = BTreeMap::new();
    for s in sentences {
        let label = gold_label(s, mode);
        let c = sentence_counts(s, mode);
        let names: Vec<&str> = match split_by {
            SplitBy::Pattern => label.pattern_splits(),
            SplitBy::TripleCount => label.triple_count_bucket.map(CountBucket::split_name).into_iter().collect(),
        };
        for n in names {
            let e = buckets.entry(n.to_string()).or_default();
            *e = e.merge(c);
        }
    }
    report.per_split = buckets.into_iter().map(|(k, c)| (k, EvalReport::from_counts(c))).collect();
    report
}

/// Sentence-level split membership, for callers who want counts of sentences.
pub fn split_sentence_counts(sentences: &[EvalSentence], mode: AlignMode) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in sentences {
        let l = gold_label(s, mode);
        for n in l.pattern_splits() {
            *out.entry(n.to_string()).or_insert(0) += 1;
        }
        if let Some(b) = l.triple_count_bucket {
            *out.entry(b.split_name().to_string()).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskReport {
    pub pair: EvalReport,
    pub relation: EvalReport,
    pub triple: EvalReport,
}

fn multiset_overlap<T: Ord + Clone>(a: &[T], b: &[T]) -> usize {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *counts.entry(x).or_default() += 1;
    }
    b.iter()
        .filter(|x| match counts.get_mut(x) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        })
        .count()
}

/// Entity-pair, relation and full-triple scores.
pub fn subtask_report(sentences: &[EvalSentence], mode: AlignMode) -> SubtaskReport {
    let mut pair = Counts::default();
    let mut rel = Counts::default();
    for s in sentences {
        let g = triple_keys(&s.gold, mode);
        let p = triple_keys(&s.pred, mode);
        let gp: Vec<(String, String)> = g.iter().map(|(h, _, t)| (h.clone(), t.clone())).collect();
        let pp: Vec<(String, String)> = p.iter().map(|(h, _, t)| (h.clone(), t.clone())).collect();
        pair = pair.merge(Counts { matched: multiset_overlap(&gp, &pp), predicted: pp.len(), gold: gp.len() });
        let gr: Vec<String> = g.iter().map(|(_, r, _)| r.clone()).collect();
        let pr: Vec<String> = p.iter().map(|(_, r, _)| r.clone()).collect();
        rel = rel.merge(Counts { matched: multiset_overlap(&gr, &pr), predicted: pr.len(), gold: gr.len() });
    }
    SubtaskReport {
        pair: EvalReport::from_counts(pair),
        relation: EvalReport::from_counts(rel),
        triple: micro_prf(sentences, mode),
    }
}

impl fmt::Display for SubtaskReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>7} {:>7} {:>7}", "element", "Prec.", "Rec.", "F1")?;
        for (name, r) in [("(h, t)", &self.pair), ("r", &self.relation), ("(h, r, t)", &self.triple)] {
            writeln!(f, "{:<10} {:>7.2} {:>7.2} {:>7.2}", name, 100.0 * r.precision, 100.0 * r.recall, 100.0 * r.f1)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    pub span_splitting: usize,
    pub entity_not_found: usize,
    pub entity_role: usize,
}

impl ErrorTaxonomy {
    pub fn total(&self) -> usize {
        self.span_splitting + self.entity_not_found + self.entity_role
    }

    /// Shares of each category, in percent.
    pub fn distribution(&self) -> [f64; 3] {
        let t = self.total().max(1) as f64;
        [self.span_splitting, self.entity_not_found, self.entity_role].map(|c| 100.0 * c as f64 / t)
    }
}

impl fmt::Display for ErrorTaxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.distribution();
        writeln!(f, "{:<22} {:>6} {:>8}", "type", "count", "share")?;
        writeln!(f, "{:<22} {:>6} {:>7.1}%", "span splitting error", self.span_splitting, d[0])?;
        writeln!(f, "{:<22} {:>6} {:>7.1}%", "entity not found", self.entity_not_found, d[1])?;
        writeln!(f, "{:<22} {:>6} {:>7.1}%", "entity role error", self.entity_role, d[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Role {
    Head,
    Tail,
}

/// Classifies every gold entity occurrence (distinct per sentence and role)
/// that no prediction reproduces in the same role. Categories are tried in
/// order: span splitting, entity not found, entity role.
pub fn error_taxonomy(sentences: &[EvalSentence], mode: AlignMode) -> ErrorTaxonomy {
    let mut tax = ErrorTaxonomy::default();
    for s in sentences {
        let mut occurrences: Vec<(Role, &Mention)> = Vec::new();
        let mut seen = BTreeSet::new();
        for t in &s.gold {
            for (role, m) in [(Role::Head, &t.head), (Role::Tail, &t.tail)] {
                if seen.insert((role, m.key(mode), m.offsets)) {
                    occurrences.push((role, m));
                }
            }
        }
        let predicted = |role: Role| -> Vec<&Mention> {
            s.pred.iter().map(|t| if role == Role::Head { &t.head } else { &t.tail }).collect()
        };
        let heads = predicted(Role::Head);
        let tails = predicted(Role::Tail);
        for (role, g) in occurrences {
            let (same, other) = if role == Role::Head { (&heads, &tails) } else { (&tails, &heads) };
            let key = g.key(mode);
            if same.iter().any(|p| p.key(mode) == key) {
                continue;
            }
            if same.iter().any(|p| p.overlaps(g)) {
                tax.span_splitting += 1;
            } else if !other.iter().any(|p| p.overlaps(g) || p.key(mode) == key) {
                tax.entity_not_found += 1;
            } else {
                tax.entity_role += 1;
            }
        }
    }
    tax
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthDistribution {
    /// Gold entity length in subword tokens -> number of distinct gold spans.
    pub histogram: BTreeMap<usize, usize>,
    pub total: usize,
    /// Smallest maximum span length covering 95%, 99% and 100% of gold entities.
    pub c_at_95: usize,
    pub c_at_99: usize,
    pub c_at_100: usize,
}

impl LengthDistribution {
    pub fn min_c_covering(&self, percent: f64) -> usize {
        let need = (percent / 100.0) * self.total as f64;
        let mut acc = 0usize;
        for (&len, &n) in &self.histogram {
            acc += n;
            if acc as f64 >= need - 1e-9 {
                return len;
            }
        }
        0
    }
}

impl fmt::Display for LengthDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>8} {:>8}", "length", "count", "cum.%")?;
        let mut acc = 0;
        for (len, n) in &self.histogram {
            acc += n;
            writeln!(f, "{:>6} {:>8} {:>7.2}%", len, n, 100.0 * acc as f64 / self.total.max(1) as f64)?;
        }
        writeln!(f, "C@95% = {}, C@99% = {}, C@100% = {}", self.c_at_95, self.c_at_99, self.c_at_100)
    }
}

pub fn length_distribution(sentences: &[Sentence]) -> LengthDistribution {
    let mut d = LengthDistribution::default();
    for s in sentences {
        for span in s.gold_spans() {
            *d.histogram.entry(span.len()).or_default() += 1;
            d.total += 1;
        }
    }
    d.c_at_95 = d.min_c_covering(95.0);
    d.c_at_99 = d.min_c_covering(99.0);
    d.c_at_100 = d.min_c_covering(100.0);
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub sentences: usize,
    pub repetitions: usize,
    /// Mean per-sentence inference time over repetitions, milliseconds.
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub per_repetition_ms: Vec<f64>,
}

/// Wall-clock inference time per sentence for the full enumerate-to-decode
/// pipeline, after `warmup` untimed passes.
pub fn timing_harness(
    model: &Model,
    sentences: &[Sentence],
    max_len: usize,
    theta: f64,
    repetitions: usize,
    warmup: usize,
) -> Result<TimingReport> {
    if repetitions == 0 {
        return Err(Error::Config("timing needs at least one repetition".into()));
    }
    if sentences.is_empty() {
        return Err(Error::EmptyInput("timing needs at least one sentence"));
    }
    for _ in 0..warmup {
        for s in sentences {
            std::hint::black_box(predict_sentence(s, model, max_len, theta)?);
        }
    }
    let mut per_rep = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        for s in sentences {
            std::hint::black_box(predict_sentence(s, model, max_len, theta)?);
        }
        per_rep.push(start.elapsed().as_secs_f64() * 1000.0 / sentences.len() as f64);
    }
    let mean = per_rep.iter().sum::<f64>() / repetitions as f64;
    let var = per_rep.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / repetitions as f64;
    Ok(TimingReport { sentences: sentences.len(), repetitions, mean_ms: mean, stddev_ms: var.sqrt(), per_repetition_ms: per_rep })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(text: &str, s: usize) -> Mention {
        Mention { text: text.into(), offsets: Some((s, s + text.len())) }
    }

    fn tr(h: Mention, r: &str, t: Mention) -> TripleRecord {
        TripleRecord { head: h, relation: r.into(), tail: t }
    }

    fn sent(id: &str, gold: Vec<TripleRecord>, pred: Vec<TripleRecord>) -> EvalSentence {
        EvalSentence { id: id.into(), gold, pred }
    }

    #[test]
    fn perfect_predictions() {
        let g = vec![tr(m("A", 0), "r", m("B", 4))];
        let r = micro_prf(&[sent("1", g.clone(), g)], AlignMode::ExactSpan);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_predictions() {
        let g = vec![tr(m("A", 0), "r", m("B", 4))];
        let r = micro_prf(&[sent("1", g, vec![])], AlignMode::ExactSpan);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn four_predicted_three_gold_two_matched() {
        let g = vec![tr(m("A", 0), "r", m("B", 2)), tr(m("C", 4), "r", m("D", 6)), tr(m("E", 8), "r", m("F", 10))];
        let p = vec![
            tr(m("A", 0), "r", m("B", 2)),
            tr(m("C", 4), "r", m("D", 6)),
            tr(m("E", 8), "q", m("F", 10)),
            tr(m("A", 0), "q", m("F", 10)),
        ];
        let r = micro_prf(&[sent("1", g, p)], AlignMode::ExactSpan);
        assert_eq!(r.precision, 0.5);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        // harmonic mean: 2 * 0.5 * 2/3 / (0.5 + 2/3) = (2/3) / (7/6) = 4/7
        assert!((r.f1 - 4.0 / 7.0).abs() < 1e-12);
        assert!((r.f1 - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn last_word_mode_compares_final_words() {
        let g = vec![tr(m("Stephen Chow", 0), "r", m("China", 20))];
        let p = vec![tr(m("Chow", 8), "r", m("China", 20))];
        assert_eq!(micro_prf(&[sent("1", g.clone(), p.clone())], AlignMode::ExactSpan).f1, 0.0);
        assert_eq!(micro_prf(&[sent("1", g, p)], AlignMode::LastWord).f1, 1.0);
    }

    #[test]
    fn orphans_are_reported() {
        let err = pair_by_id(vec![("a".into(), vec![]), ("b".into(), vec![])], vec![("a".into(), vec![]), ("z".into(), vec![])]);
        match err {
            Err(Error::OrphanIds { missing_predictions, unknown_predictions }) => {
                assert_eq!(missing_predictions, vec!["b".to_string()]);
                assert_eq!(unknown_predictions, vec!["z".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subtask_decomposition_wrong_relation() {
        let g = vec![tr(m("A", 0), "r", m("B", 2))];
        let p = vec![tr(m("A", 0), "q", m("B", 2))];
        let s = subtask_report(&[sent("1", g, p)], AlignMode::ExactSpan);
        assert_eq!(s.pair.f1, 1.0);
        assert_eq!(s.relation.f1, 0.0);
        assert_eq!(s.triple.f1, 0.0);
    }

    #[test]
    fn subtask_full_match() {
        let g = vec![tr(m("A", 0), "r", m("B", 2)), tr(m("A", 0), "q", m("C", 4))];
        let s = subtask_report(&[sent("1", g.clone(), g)], AlignMode::ExactSpan);
        assert_eq!((s.pair.f1, s.relation.f1, s.triple.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn subtask_role_swap_by_hand() {
        // gold: (A,r,B) (B,q,C) (C,r,D); predicted: (A,r,B) (C,q,B) (C,r,D)
        let g = vec![tr(m("A", 0), "r", m("B", 2)), tr(m("B", 2), "q", m("C", 4)), tr(m("C", 4), "r", m("D", 6))];
        let p = vec![tr(m("A", 0), "r", m("B", 2)), tr(m("C", 4), "q", m("B", 2)), tr(m("C", 4), "r", m("D", 6))];
        let s = subtask_report(&[sent("1", g, p)], AlignMode::ExactSpan);
        // pairs: 2 of 3 match; relations multiset {r,q,r} vs {r,q,r}: 3 of 3; triples 2 of 3
        assert_eq!(s.pair.counts, Counts { matched: 2, predicted: 3, gold: 3 });
        assert_eq!(s.relation.counts, Counts { matched: 3, predicted: 3, gold: 3 });
        assert_eq!(s.triple.counts, Counts { matched: 2, predicted: 3, gold: 3 });
    }

    #[test]
    fn taxonomy_categories() {
        // "Stephen Chow" predicted as head "Stephen": span splitting.
        let g = vec![tr(m("Stephen Chow", 0), "nationality", m("China", 30))];
        let p = vec![tr(m("Stephen", 0), "nationality", m("China", 30))];
        let t = error_taxonomy(&[sent("1", g.clone(), p)], AlignMode::ExactSpan);
        assert_eq!(t, ErrorTaxonomy { span_splitting: 1, entity_not_found: 0, entity_role: 0 });

        // nothing predicted: both entities not found
        let t = error_taxonomy(&[sent("1", g.clone(), vec![])], AlignMode::ExactSpan);
        assert_eq!(t, ErrorTaxonomy { span_splitting: 0, entity_not_found: 2, entity_role: 0 });

        // gold head only predicted as a tail; gold tail predicted as head
        let p = vec![tr(m("China", 30), "nationality", m("Stephen Chow", 0))];
        let t = error_taxonomy(&[sent("1", g, p)], AlignMode::ExactSpan);
        assert_eq!(t, ErrorTaxonomy { span_splitting: 0, entity_not_found: 0, entity_role: 2 });
    }

    #[test]
    fn taxonomy_priority_prefers_splitting() {
        // Gold head overlaps a same-role prediction with different boundaries
        // and also appears identically as a tail: splitting wins.
        let g = vec![tr(m("New York", 0), "r", m("USA", 20))];
        let p = vec![tr(m("York", 4), "r", m("USA", 20)), tr(m("USA", 20), "q", m("New York", 0))];
        let t = error_taxonomy(&[sent("1", g, p)], AlignMode::ExactSpan);
        assert_eq!(t.span_splitting, 1);
        assert_eq!(t.total(), 1);
    }

    fn span_sentence(id: &str, lens: &[usize]) -> Sentence {
        let n: usize = lens.iter().sum::<usize>() * 2;
        let mut triples = Vec::new();
        let mut pos = 0;
        let mut ents = Vec::new();
        for &l in lens {
            ents.push(Span { start: pos, end: pos + l - 1 });
            pos += l + 1;
        }
        for pair in ents.chunks(2) {
            triples.push(GoldTriple { head: pair[0], relation: 0, tail: *pair.get(1).unwrap_or(&pair[0]) });
        }
        Sentence {
            id: id.into(),
            text: String::new(),
            tokens: vec![String::new(); n],
            token_ids: vec![0; n],
            offsets: vec![(0, 0); n],
            gold_triples: triples,
        }
    }

    #[test]
    fn length_histograms() {
        let d = length_distribution(&[span_sentence("a", &[1, 1]), span_sentence("b", &[1, 1])]);
        assert_eq!(d.histogram, BTreeMap::from([(1, 4)]));
        assert_eq!(d.c_at_100, 1);
        let d = length_distribution(&[span_sentence("a", &[1, 1, 2, 3])]);
        assert_eq!(d.histogram, BTreeMap::from([(1, 2), (2, 1), (3, 1)]));
        assert_eq!(d.c_at_100, 3);
        assert_eq!(d.min_c_covering(50.0), 1);
        assert_eq!(d.min_c_covering(75.0), 2);
    }

    #[test]
    fn split_report_only_populates_present_splits() {
        let g = vec![tr(m("A", 0), "r", m("B", 2))];
        let r = split_report(&[sent("1", g.clone(), g.clone()), sent("2", g.clone(), vec![])], SplitBy::Pattern, AlignMode::ExactSpan);
        assert_eq!(r.per_split.keys().collect::<Vec<_>>(), vec!["Normal"]);
        let r = split_report(&[sent("1", g.clone(), g)], SplitBy::TripleCount, AlignMode::ExactSpan);
        assert_eq!(r.per_split.keys().collect::<Vec<_>>(), vec!["N=1"]);
    }

    #[test]
    fn epo_fixture_lands_in_epo_and_bucket() {
        let g = vec![tr(m("Beijing", 0), "capital_of", m("China", 26)), tr(m("China", 26), "contains", m("Beijing", 0))];
        let s = sent("1", g.clone(), g);
        let counts = split_sentence_counts(std::slice::from_ref(&s), AlignMode::ExactSpan);
        assert_eq!(counts.get("EPO"), Some(&1));
        assert_eq!(counts.get("N=2"), Some(&1));
        assert_eq!(counts.get("Normal"), None);
    }

    #[test]
    fn gold_from_record_aligns_at_word_boundaries() {
        let rec = RawRecord {
            id: None,
            text: "Chinatown is in China".into(),
            triple_list: vec![("Chinatown".into(), "in".into(), "China".into())],
        };
        let g = gold_from_record(&rec, AlignMode::ExactSpan);
        assert_eq!(g[0].tail.offsets, Some((16, 21)));
        let rec = RawRecord {
            id: None,
            text: "Stephen Chow is from Hong Kong".into(),
            triple_list: vec![("Stephen Chow".into(), "from".into(), "Hong Kong".into())],
        };
        let g = gold_from_record(&rec, AlignMode::LastWord);
        assert_eq!(g[0].head.text, "Chow");
        assert_eq!(g[0].tail.offsets, Some((26, 30)));
    }

    #[test]
    fn timing_rejects_zero_repetitions() {
        let cfg = crate::model::ModelConfig { encoder: crate::encoder::EncoderConfig::toy(4), entity_width: 4, relations: 1 };
        let model = Model::new(cfg, &mut crate::rng::seeded(0)).unwrap();
        assert!(timing_harness(&model, &[span_sentence("a", &[1, 1])], 2, 0.5, 0, 0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use rand::seq::SliceRandom;

        const WORDS: [&str; 6] = ["aa", "bb", "cc", "dd", "ee", "ff"];

        fn arb_mention() -> impl Strategy<Value = Mention> {
            (0usize..6, 0usize..2).prop_map(|(i, extra)| {
                let j = (i + extra).min(5);
                Mention { text: WORDS[i..=j].join(" "), offsets: Some((3 * i, 3 * j + 2)) }
            })
        }

        fn arb_triple() -> impl Strategy<Value = TripleRecord> {
            (arb_mention(), 0usize..3, arb_mention()).prop_map(|(head, r, tail)| TripleRecord { head, relation: format!("r{r}"), tail })
        }

        fn arb_corpus() -> impl Strategy<Value = Vec<EvalSentence>> {
            prop::collection::vec((prop::collection::vec(arb_triple(), 0..5), prop::collection::vec(arb_triple(), 0..5)), 1..6).prop_map(|v| {
                v.into_iter().enumerate().map(|(i, (gold, pred))| EvalSentence { id: i.to_string(), gold, pred }).collect()
            })
        }

        fn arb_mode() -> impl Strategy<Value = AlignMode> {
            prop_oneof![Just(AlignMode::ExactSpan), Just(AlignMode::LastWord)]
        }

        proptest! {
            #[test]
            fn micro_prf_ignores_order(mut data in arb_corpus(), mode in arb_mode(), seed in any::<u64>()) {
                let before = micro_prf(&data, mode);
                let mut rng = crate::rng::seeded(seed);
                data.shuffle(&mut rng);
                for s in &mut data {
                    s.gold.shuffle(&mut rng);
                    s.pred.shuffle(&mut rng);
                }
                prop_assert_eq!(before, micro_prf(&data, mode));
            }

            #[test]
            fn relaxed_recall_dominates(data in arb_corpus(), mode in arb_mode()) {
                let r = subtask_report(&data, mode);
                prop_assert!(r.pair.recall >= r.triple.recall);
                prop_assert!(r.relation.recall >= r.triple.recall);
            }

            #[test]
            fn f1_respects_harmonic_bounds(data in arb_corpus(), mode in arb_mode()) {
                let r = micro_prf(&data, mode);
                let lo = r.precision.min(r.recall);
                prop_assert!(r.f1 <= 2.0 * lo / (1.0 + lo) + 1e-12);
                prop_assert!(r.f1 <= r.precision.max(r.recall) + 1e-12);
                prop_assert!(r.counts.matched <= r.counts.predicted.min(r.counts.gold));
                if r.precision + r.recall > 0.0 {
                    prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-12);
                }
            }

            #[test]
            fn taxonomy_covers_every_unmatched_occurrence(data in arb_corpus(), mode in arb_mode()) {
                let mut expected = 0;
                for s in &data {
                    let mut seen = BTreeSet::new();
                    for t in &s.gold {
                        for (is_head, g) in [(true, &t.head), (false, &t.tail)] {
                            if !seen.insert((is_head, g.key(mode), g.offsets)) {
                                continue;
                            }
                            let reproduced = s.pred.iter().any(|p| (if is_head { &p.head } else { &p.tail }).key(mode) == g.key(mode));
                            if !reproduced {
                                expected += 1;
                            }
                        }
                    }
                }
                prop_assert_eq!(error_taxonomy(&data, mode).total(), expected);
            }
        }
    }
}
