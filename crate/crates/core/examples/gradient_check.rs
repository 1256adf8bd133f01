//! Compare analytic gradients against central finite differences on a tiny model.
//!
//! cargo run --release --example gradient_check -- [seed]

use triplink::candidates::sample_training_set;
use triplink::corpus::{generate_synthetic, SyntheticConfig};
use triplink::rng::seeded;
use triplink::train::RunConfig;
use triplink::Model;

fn main() -> triplink::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let corpus = generate_synthetic(&SyntheticConfig { sentences: 5, seed, ..SyntheticConfig::default() })?;
    let cfg = RunConfig { width: 8, entity_width: 6, ..RunConfig::toy() };
    let mut model = Model::new(cfg.model_config(corpus.tokenizer.vocab().len(), corpus.schema.len())?, &mut seeded(seed))?;
    let s = &corpus.sentences[0];
    let cands = sample_training_set(s, cfg.c_train, 6, &mut seeded(seed))?;

    let (loss, grads) = model.loss_and_grad(&s.token_ids, &cands, &s.gold_triples)?;
    println!("loss {loss:.6} over {} candidates", cands.len());
    let step = 1e-5;
    for (ti, (name, g)) in grads.tensors().into_iter().enumerate() {
        let g: Vec<f64> = g.iter().copied().collect();
        let mut worst = 0.0f64;
        // Probe a handful of entries per tensor; embedding rows of absent tokens have zero gradient.
        for j in (0..g.len()).step_by((g.len() / 8).max(1)) {
            let orig = model.tensors_mut()[ti].1.as_slice_mut().expect("contiguous")[j];
            model.tensors_mut()[ti].1.as_slice_mut().expect("contiguous")[j] = orig + step;
            let plus = model.loss(&s.token_ids, &cands, &s.gold_triples)?;
            model.tensors_mut()[ti].1.as_slice_mut().expect("contiguous")[j] = orig - step;
            let minus = model.loss(&s.token_ids, &cands, &s.gold_triples)?;
            model.tensors_mut()[ti].1.as_slice_mut().expect("contiguous")[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max((numeric - g[j]).abs() / numeric.abs().max(g[j].abs()).max(1e-6));
        }
        println!("{name:<32} {:>6} entries, worst relative error {worst:.2e}", g.len());
    }
    Ok(())
}
