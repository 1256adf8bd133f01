//! Enumerate candidate spans for a short sentence and draw a training set.
//!
//! cargo run --example enumerate_candidates -- [max_len]

use triplink::candidates::{count_formula, enumerate_spans, inference_set, sample_training_set};
use triplink::corpus::{Tokenizer, Vocab};
use triplink::rng::seeded;
use triplink::{GoldTriple, Sentence, Span};

fn main() -> triplink::Result<()> {
    let c: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let text = "Beijing is the capital of China";
    let tokenizer = Tokenizer::new(Vocab::from_pieces(text.split_whitespace()));
    let tok = tokenizer.tokenize(text)?;

    let spans = enumerate_spans(tok.tokens.len(), c)?;
    println!("L = {}, C = {c}: {} candidates", tok.tokens.len(), spans.len());
    if c < tok.tokens.len() {
        println!("closed form agrees: {}", count_formula(tok.tokens.len(), c)? == spans.len());
    }
    for s in &spans {
        println!("  [{}, {}] {}", s.start, s.end, tok.tokens[s.start..=s.end].join(" "));
    }

    let sentence = Sentence {
        id: "demo".into(),
        text: text.into(),
        tokens: tok.tokens.clone(),
        token_ids: tok.ids.clone(),
        offsets: tok.offsets.clone(),
        gold_triples: vec![GoldTriple { head: Span::single(5), relation: 0, tail: Span::single(0) }],
    };
    for epoch in 0..2u64 {
        let set = sample_training_set(&sentence, c, 3, &mut seeded(epoch))?;
        let shown: Vec<String> = set.spans.iter().zip(&set.gold_mask).map(|(s, g)| format!("{}{}", sentence.span_text(*s), if *g { "*" } else { "" })).collect();
        println!("training draw {epoch}: {}", shown.join(" | "));
    }
    println!("inference set: {} spans", inference_set(&sentence, c)?.len());
    Ok(())
}
