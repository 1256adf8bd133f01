//! Score every candidate pair of a sentence with an untrained model and watch
//! the decoded triple set shrink as the threshold rises.
//!
//! cargo run --example score_and_decode

use triplink::candidates::inference_set;
use triplink::corpus::{generate_synthetic, SyntheticConfig};
use triplink::decoder::decode;
use triplink::rng::seeded;
use triplink::train::RunConfig;
use triplink::Model;

fn main() -> triplink::Result<()> {
    let corpus = generate_synthetic(&SyntheticConfig { sentences: 10, ..SyntheticConfig::default() })?;
    let cfg = RunConfig::toy();
    let model = Model::new(cfg.model_config(corpus.tokenizer.vocab().len(), corpus.schema.len())?, &mut seeded(3))?;

    let sentence = &corpus.sentences[0];
    let cands = inference_set(sentence, cfg.c_infer)?;
    let scores = model.score_spans(&sentence.token_ids, &cands.spans)?;
    let (n, k, _) = scores.probs.dim();
    println!("{}\n{n} spans x {k} relations x {n} spans = {} cells", sentence.text, n * k * n);

    let mut previous = usize::MAX;
    for theta in [0.45, 0.48, 0.5, 0.52, 0.55] {
        let triples = decode(&scores, &cands.spans, theta)?;
        assert!(triples.len() <= previous);
        previous = triples.len();
        println!("theta {theta:.2}: {} triples", triples.len());
    }
    let best = decode(&scores, &cands.spans, 0.5)?.into_iter().max_by(|a, b| a.score.total_cmp(&b.score));
    if let Some(t) = best {
        println!(
            "highest cell: ({}, {}, {}) p = {:.4}",
            sentence.span_text(t.head),
            corpus.schema.name(t.relation),
            sentence.span_text(t.tail),
            t.score
        );
    }
    Ok(())
}
