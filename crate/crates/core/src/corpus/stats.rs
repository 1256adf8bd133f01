use std::fmt;

use serde::Serialize;

use super::pattern::{classify_pattern, CountBucket};
use super::Sentence;

/// Corpus statistics in the layout of the usual dataset tables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub sentences: usize,
    pub normal: usize,
    pub seo: usize,
    pub epo: usize,
    pub hto: usize,
    /// Sentences with 1, 2, 3, 4 and >=5 triples.
    pub triple_buckets: [usize; 5],
    pub zero_triple_sentences: usize,
    pub triples: usize,
    /// Longest gold entity in subword tokens (`E-len`).
    pub max_entity_len: usize,
}

pub fn dataset_stats(sentences: &[Sentence]) -> DatasetStats {
    let mut st = DatasetStats { sentences: sentences.len(), ..DatasetStats::default() };
    for s in sentences {
        let label = classify_pattern(s);
        st.normal += usize::from(label.is_normal);
        st.seo += usize::from(label.has_seo);
        st.epo += usize::from(label.has_epo);
        st.hto += usize::from(label.has_hto);
        match label.triple_count_bucket {
            Some(b) => st.triple_buckets[b.index()] += 1,
            None => st.zero_triple_sentences += 1,
        }
        st.triples += s.gold_triples.len();
        for t in &s.gold_triples {
            st.max_entity_len = st.max_entity_len.max(t.head.len()).max(t.tail.len());
        }
    }
    st
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>9} {:>7} {:>6} {:>6} {:>6}", "Sentences", "Normal", "SEO", "EPO", "HTO")?;
        for b in CountBucket::ALL {
            write!(f, " {:>6}", b.split_name())?;
        }
        writeln!(f, " {:>8} {:>6}", "Triples", "E-len")?;
        write!(f, "{:>9} {:>7} {:>6} {:>6} {:>6}", self.sentences, self.normal, self.seo, self.epo, self.hto)?;
        for c in self.triple_buckets {
            write!(f, " {c:>6}")?;
        }
        writeln!(f, " {:>8} {:>6}", self.triples, self.max_entity_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{GoldTriple, Span};

    fn sentence(id: &str, len: usize, triples: Vec<GoldTriple>) -> Sentence {
        Sentence {
            id: id.into(),
            text: String::new(),
            tokens: vec![String::new(); len],
            token_ids: vec![0; len],
            offsets: vec![(0, 0); len],
            gold_triples: triples,
        }
    }

    fn t(h: (usize, usize), r: usize, tl: (usize, usize)) -> GoldTriple {
        GoldTriple { head: Span { start: h.0, end: h.1 }, relation: r, tail: Span { start: tl.0, end: tl.1 } }
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        assert_eq!(dataset_stats(&[]), DatasetStats::default());
    }

    #[test]
    fn three_sentence_hand_tally() {
        let corpus = vec![
            // normal, 1 triple, lengths 1 and 2
            sentence("a", 6, vec![t((0, 0), 0, (3, 4))]),
            // EPO, 2 triples
            sentence("b", 6, vec![t((0, 0), 0, (5, 5)), t((5, 5), 1, (0, 0))]),
            // SEO + HTO, 3 triples, longest entity 3
            sentence("c", 8, vec![t((0, 2), 0, (2, 2)), t((0, 2), 1, (6, 6)), t((4, 4), 0, (6, 6))]),
        ];
        let st = dataset_stats(&corpus);
        assert_eq!(st.sentences, 3);
        assert_eq!((st.normal, st.epo, st.seo, st.hto), (1, 1, 1, 1));
        assert_eq!(st.triple_buckets, [1, 1, 1, 0, 0]);
        assert_eq!(st.triples, 6);
        assert_eq!(st.max_entity_len, 3);
        let mut rev = corpus.clone();
        rev.reverse();
        assert_eq!(dataset_stats(&rev), st);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn stats_ignore_sentence_order(seed in 0u64..1000, shuffle in proptest::prelude::any::<u64>()) {
            use rand::seq::SliceRandom;
            let cfg = crate::corpus::SyntheticConfig { sentences: 30, seed, ..crate::corpus::SyntheticConfig::default() };
            let mut sentences = crate::corpus::generate_synthetic(&cfg).unwrap().sentences;
            let before = dataset_stats(&sentences);
            sentences.shuffle(&mut crate::rng::seeded(shuffle));
            proptest::prop_assert_eq!(before, dataset_stats(&sentences));
        }
    }
}
