//! Generate a synthetic corpus and look at its overlap patterns and entity lengths.
//!
//! cargo run --example synth_corpus -- [sentences] [max_entity_words]

use triplink::corpus::{classify_pattern, dataset_stats, generate_synthetic, SyntheticConfig};
use triplink::evaluation::length_distribution;

fn main() -> triplink::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let sentences = args.next().flatten().unwrap_or(200);
    let max_entity_words = args.next().flatten().unwrap_or(1);
    let corpus = generate_synthetic(&SyntheticConfig { sentences, max_entity_words, ..SyntheticConfig::default() })?;

    println!("relations: {}", corpus.schema.names().join(", "));
    println!("vocabulary: {} pieces\n", corpus.tokenizer.vocab().len());
    for (s, p) in corpus.sentences.iter().zip(&corpus.patterns).take(6) {
        println!("{p:?}: {}", s.text);
        for t in &s.gold_triples {
            println!("    ({}, {}, {})", s.span_text(t.head), corpus.schema.name(t.relation), s.span_text(t.tail));
        }
        println!("    splits: {:?}", classify_pattern(s).pattern_splits());
    }
    println!("\n{}", dataset_stats(&corpus.sentences));
    print!("{}", length_distribution(&corpus.sentences));
    Ok(())
}
