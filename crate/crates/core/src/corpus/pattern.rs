//! Overlap pattern classification.
//!
//! * EPO: one unordered entity pair appears in two or more triples with
//!   distinct relations.
//! * SEO: two distinct triples share exactly one entity span.
//! * HTO: the head and tail span of a single triple intersect.
//!
//! Flags are not exclusive; a sentence is Normal exactly when none hold.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{GoldTriple, Sentence, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CountBucket {
    One,
    Two,
    Three,
    Four,
    FivePlus,
}

impl CountBucket {
    pub const ALL: [CountBucket; 5] =
        [CountBucket::One, CountBucket::Two, CountBucket::Three, CountBucket::Four, CountBucket::FivePlus];

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1 => Some(CountBucket::One),
            2 => Some(CountBucket::Two),
            3 => Some(CountBucket::Three),
            4 => Some(CountBucket::Four),
            _ => Some(CountBucket::FivePlus),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Split name as used in reports (`N=1` .. `N>=5`).
    pub fn split_name(self) -> &'static str {
        match self {
            CountBucket::One => "N=1",
            CountBucket::Two => "N=2",
            CountBucket::Three => "N=3",
            CountBucket::Four => "N=4",
            CountBucket::FivePlus => "N>=5",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternLabel {
    pub is_normal: bool,
    pub has_epo: bool,
    pub has_seo: bool,
    pub has_hto: bool,
    /// `None` for sentences without triples.
    pub triple_count_bucket: Option<CountBucket>,
}

impl PatternLabel {
    /// Pattern split names this label belongs to.
    pub fn pattern_splits(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.is_normal {
            v.push("Normal");
        }
        if self.has_epo {
            v.push("EPO");
        }
        if self.has_seo {
            v.push("SEO");
        }
        if self.has_hto {
            v.push("HTO");
        }
        v
    }
}

pub fn classify_pattern(sentence: &Sentence) -> PatternLabel {
    classify_triples(&sentence.gold_triples)
}

pub(crate) fn classify_triples(triples: &[GoldTriple]) -> PatternLabel {
    let distinct: BTreeSet<GoldTriple> = triples.iter().copied().collect();

    let mut pair_relations: BTreeMap<(Span, Span), BTreeSet<usize>> = BTreeMap::new();
    for t in &distinct {
        let key = if t.head <= t.tail { (t.head, t.tail) } else { (t.tail, t.head) };
        pair_relations.entry(key).or_default().insert(t.relation);
    }
    let has_epo = pair_relations.values().any(|rels| rels.len() >= 2);

    let entity_sets: Vec<BTreeSet<Span>> = distinct.iter().map(|t| [t.head, t.tail].into_iter().collect()).collect();
    let has_seo = entity_sets
        .iter()
        .enumerate()
        .any(|(i, a)| entity_sets[i + 1..].iter().any(|b| a.intersection(b).count() == 1));

    let has_hto = distinct.iter().any(|t| t.head.intersects(&t.tail));

    PatternLabel {
        is_normal: !(has_epo || has_seo || has_hto),
        has_epo,
        has_seo,
        has_hto,
        triple_count_bucket: CountBucket::from_count(triples.len()),
    }
}
