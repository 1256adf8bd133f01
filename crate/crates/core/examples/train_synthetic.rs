//! Train the toy model on a synthetic corpus with all overlap patterns and
//! report held-out scores per pattern.
//!
//! cargo run --release --example train_synthetic -- [epochs]

use std::time::Instant;

use triplink::corpus::{generate_synthetic, SyntheticConfig};
use triplink::evaluation::{split_report, EvalSentence, SplitBy};
use triplink::rng::seeded;
use triplink::train::{train, LogEntry, RunConfig};
use triplink::Model;

fn main() -> triplink::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let corpus = generate_synthetic(&SyntheticConfig::default())?;
    let (train_set, test_set) = corpus.sentences.split_at(800);
    let cfg = RunConfig { epochs, eval_every: 10, ..RunConfig::toy() };

    let mc = cfg.model_config(corpus.tokenizer.vocab().len(), corpus.schema.len())?;
    let mut model = Model::new(mc, &mut seeded(cfg.seed))?;
    println!("{} parameters, {} train / {} test sentences", model.parameter_count(), train_set.len(), test_set.len());

    let start = Instant::now();
    let outcome = train(&mut model, train_set, Some(test_set), &corpus.schema, &cfg, |e| {
        if let LogEntry::Eval { epoch, f1, .. } = e {
            println!("epoch {epoch:>4}  held-out F1 {f1:.4}  ({:.1}s)", start.elapsed().as_secs_f64());
        }
    })?;

    let compared: Vec<EvalSentence> = test_set
        .iter()
        .map(|s| {
            let p = triplink::decoder::predict_sentence(s, &outcome.model, cfg.c_infer, cfg.theta)?;
            Ok(EvalSentence::from_spans(s, &p, &corpus.schema))
        })
        .collect::<triplink::Result<_>>()?;
    print!("{}", split_report(&compared, SplitBy::Pattern, cfg.match_mode));
    Ok(())
}
