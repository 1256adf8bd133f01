//! Candidate entity generation.
//!
//! Every contiguous span of length `1..=C` is a candidate. Training uses all
//! gold spans plus a uniform sample of `n_neg` negatives; inference scores
//! the full enumeration.

use std::collections::HashSet;

use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Span};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateMode {
    Train,
    Inference,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub spans: Vec<Span>,
    /// `gold_mask[i]` marks span `i` as a gold entity (all false at inference).
    pub gold_mask: Vec<bool>,
    pub max_len: usize,
    pub mode: CandidateMode,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn position(&self, span: &Span) -> Option<usize> {
        self.spans.iter().position(|s| s == span)
    }
}

/// All spans of length `1..=max_len`, ordered by `(start, end)`.
///
/// `max_len >= seq_len` is clamped to `seq_len`.
pub fn enumerate_spans(seq_len: usize, max_len: usize) -> Result<Vec<Span>> {
    if seq_len == 0 {
        return Err(Error::EmptyInput("cannot enumerate spans of an empty sentence"));
    }
    if max_len == 0 {
        return Err(Error::Config("maximum span length must be at least 1".into()));
    }
    let c = max_len.min(seq_len);
    let mut spans = Vec::with_capacity(seq_len * c);
    for start in 0..seq_len {
        for end in start..(start + c).min(seq_len) {
            spans.push(Span { start, end });
        }
    }
    Ok(spans)
}

/// Closed-form candidate count `L*C + C/2 - C^2/2` for `1 <= C < L`.
///
/// Computed as `L*C - C*(C-1)/2`, the same value in exact integer arithmetic.
pub fn count_formula(seq_len: usize, max_len: usize) -> Result<usize> {
    if max_len == 0 || max_len >= seq_len {
        return Err(Error::Config(format!("count formula requires 1 <= C < L, got L={seq_len}, C={max_len}")));
    }
    Ok(seq_len * max_len - max_len * (max_len - 1) / 2)
}

fn clamped(seq_len: usize, max_len: usize) -> usize {
    if max_len > seq_len {
        warn!("candidate length {max_len} exceeds sentence length {seq_len}; clamping");
    }
    max_len.min(seq_len)
}

/// Gold spans plus up to `n_neg` negatives drawn uniformly without replacement.
///
/// Gold spans are always included, even when longer than `max_len`; the
/// negative pool excludes them. Gold spans come first (first-appearance order),
/// then the sampled negatives in enumeration order.
pub fn sample_training_set<R: Rng + ?Sized>(
    sentence: &Sentence,
    max_len: usize,
    n_neg: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    let c = clamped(sentence.len(), max_len);
    let gold = sentence.gold_spans();
    let gold_set: HashSet<Span> = gold.iter().copied().collect();
    let negatives: Vec<Span> = enumerate_spans(sentence.len(), c)?.into_iter().filter(|s| !gold_set.contains(s)).collect();

    let mut spans = gold.clone();
    if n_neg >= negatives.len() {
        spans.extend_from_slice(&negatives);
    } else {
        let mut picked = sample(rng, negatives.len(), n_neg).into_vec();
        picked.sort_unstable();
        spans.extend(picked.into_iter().map(|i| negatives[i]));
    }
    let mut gold_mask = vec![false; spans.len()];
    gold_mask[..gold.len()].fill(true);
    Ok(CandidateSet { spans, gold_mask, max_len: c, mode: CandidateMode::Train })
}

/// Full enumeration for decoding.
pub fn inference_set(sentence: &Sentence, max_len: usize) -> Result<CandidateSet> {
    let c = clamped(sentence.len(), max_len);
    let spans = enumerate_spans(sentence.len(), c)?;
    Ok(CandidateSet { gold_mask: vec![false; spans.len()], spans, max_len: c, mode: CandidateMode::Inference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GoldTriple;
    use crate::rng::seeded;
    use proptest::prelude::*;

    /// Independent oracle: collect every (i, j) with j - i + 1 <= c.
    fn brute_force(l: usize, c: usize) -> HashSet<Span> {
        let mut out = HashSet::new();
        for i in 0..l {
            for j in 0..l {
                if i <= j && j - i < c {
                    out.insert(Span { start: i, end: j });
                }
            }
        }
        out
    }

    fn sentence(len: usize, gold: &[(usize, usize)]) -> Sentence {
        let triples = gold
            .chunks(2)
            .map(|p| GoldTriple {
                head: Span { start: p[0].0, end: p[0].1 },
                relation: 0,
                tail: Span { start: p[1].0, end: p[1].1 },
            })
            .collect();
        Sentence {
            id: "s".into(),
            text: String::new(),
            tokens: vec![String::new(); len],
            token_ids: vec![0; len],
            offsets: vec![(0, 0); len],
            gold_triples: triples,
        }
    }

    #[test]
    fn counts_for_listed_cases() {
        assert_eq!(enumerate_spans(6, 2).unwrap().len(), 11);
        assert_eq!(enumerate_spans(5, 1).unwrap().len(), 5);
        assert_eq!(enumerate_spans(10, 4).unwrap().len(), 34);
        assert_eq!(brute_force(10, 4).len(), 34);
        assert_eq!(count_formula(6, 2).unwrap(), 11);
        assert_eq!(count_formula(9, 5).unwrap(), 35);
        assert_eq!(brute_force(9, 5).len(), 35);
        assert_eq!(count_formula(7, 1).unwrap(), 7);
    }

    #[test]
    fn errors_and_clamping() {
        assert!(enumerate_spans(0, 2).is_err());
        assert!(count_formula(4, 4).is_err());
        assert!(count_formula(4, 0).is_err());
        assert_eq!(enumerate_spans(3, 10).unwrap().len(), 6);
    }

    #[test]
    fn enumeration_is_ordered() {
        let spans = enumerate_spans(4, 2).unwrap();
        let mut sorted = spans.clone();
        sorted.sort();
        assert_eq!(spans, sorted);
    }

    #[test]
    fn fallback_uses_every_negative() {
        // L=10, C=4 gives 34 candidates; two gold spans leave 32 negatives.
        let s = sentence(10, &[(0, 0), (5, 6)]);
        let set = sample_training_set(&s, 4, 100, &mut seeded(1)).unwrap();
        assert_eq!(set.len(), 34);
        assert_eq!(set.gold_mask.iter().filter(|&&g| g).count(), 2);
    }

    #[test]
    fn zero_negatives_keeps_gold_only() {
        let s = sentence(10, &[(0, 0), (5, 6)]);
        let set = sample_training_set(&s, 4, 0, &mut seeded(1)).unwrap();
        assert_eq!(set.spans, vec![Span::single(0), Span { start: 5, end: 6 }]);
    }

    #[test]
    fn long_gold_spans_are_force_included() {
        let s = sentence(10, &[(0, 6), (8, 8)]);
        let set = sample_training_set(&s, 2, 5, &mut seeded(3)).unwrap();
        assert!(set.spans.contains(&Span { start: 0, end: 6 }));
        assert_eq!(set.len(), 7);
        let unique: HashSet<_> = set.spans.iter().collect();
        assert_eq!(unique.len(), set.len());
        // unreachable at inference
        assert!(!inference_set(&s, 2).unwrap().spans.contains(&Span { start: 0, end: 6 }));
    }

    #[test]
    fn duplicate_gold_spans_stored_once() {
        let s = sentence(6, &[(0, 0), (3, 3), (0, 0), (5, 5)]);
        let set = sample_training_set(&s, 1, 0, &mut seeded(0)).unwrap();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let s = sentence(20, &[(0, 0), (5, 6)]);
        let a = sample_training_set(&s, 3, 10, &mut seeded(42)).unwrap();
        let b = sample_training_set(&s, 3, 10, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
    }

    #[test]
    fn negative_inclusion_is_uniform() {
        // 20 tokens, C=2: 39 candidates, 2 gold, 37 negatives; n_neg=10.
        let s = sentence(20, &[(0, 0), (5, 6)]);
        let negatives: Vec<Span> = enumerate_spans(20, 2)
            .unwrap()
            .into_iter()
            .filter(|sp| *sp != Span::single(0) && *sp != Span { start: 5, end: 6 })
            .collect();
        let trials = 4000;
        let mut hits = std::collections::HashMap::new();
        for seed in 0..trials {
            let set = sample_training_set(&s, 2, 10, &mut seeded(seed)).unwrap();
            for sp in &set.spans[2..] {
                *hits.entry(*sp).or_insert(0usize) += 1;
            }
        }
        let p = 10.0 / negatives.len() as f64;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for sp in &negatives {
            let h = *hits.get(sp).unwrap_or(&0) as f64;
            assert!((h - mean).abs() <= 3.0 * sigma + 1.0, "{sp}: {h} vs {mean} ± {sigma}");
        }
    }

    proptest! {
        #[test]
        fn enumeration_matches_formula_and_oracle(l in 2usize..64, c_raw in 1usize..64) {
            let c = 1 + c_raw % (l - 1);
            let spans = enumerate_spans(l, c).unwrap();
            prop_assert_eq!(spans.len(), count_formula(l, c).unwrap());
            let set: HashSet<Span> = spans.into_iter().collect();
            prop_assert_eq!(set, brute_force(l, c));
        }

        #[test]
        fn training_set_always_contains_gold(l in 3usize..30, c in 1usize..6, n_neg in 0usize..40, seed in any::<u64>(), a in 0usize..30, b in 0usize..30) {
            let (a, b) = (a % l, b % l);
            let s = sentence(l, &[(a.min(b), a.max(b)), (b, b)]);
            let set = sample_training_set(&s, c, n_neg, &mut seeded(seed)).unwrap();
            for g in s.gold_spans() {
                prop_assert!(set.spans.contains(&g));
            }
            for (sp, &g) in set.spans.iter().zip(&set.gold_mask) {
                prop_assert!(g || sp.len() <= c);
            }
        }
    }
}
