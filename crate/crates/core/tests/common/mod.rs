//! Shared oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use triplink::candidates::{CandidateMode, CandidateSet};
use triplink::encoder::{EncoderConfig, MixerKind};
use triplink::model::{Model, ModelConfig};
use triplink::rng::seeded;
use triplink::{GoldTriple, Span};

/// Central finite difference of `f` with respect to every parameter entry,
/// compared against the analytic gradient. Returns the worst relative error
/// together with the offending tensor name.
pub fn finite_difference_check(
    model: &mut Model,
    ids: &[u32],
    cands: &CandidateSet,
    triples: &[GoldTriple],
    step: f64,
) -> (f64, String) {
    let (_, grads) = model.loss_and_grad(ids, cands, triples).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, t)| (n, t.iter().copied().collect())).collect();
    let mut worst = (0.0, String::new());
    for (ti, (name, g)) in analytic.iter().enumerate() {
        for (j, &ga) in g.iter().enumerate() {
            let orig = {
                let mut ts = model.tensors_mut();
                let t = &mut ts[ti].1;
                let v = t.as_slice_mut().unwrap();
                let o = v[j];
                v[j] = o + step;
                o
            };
            let plus = model.loss(ids, cands, triples).unwrap();
            model.tensors_mut()[ti].1.as_slice_mut().unwrap()[j] = orig - step;
            let minus = model.loss(ids, cands, triples).unwrap();
            model.tensors_mut()[ti].1.as_slice_mut().unwrap()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let rel = (numeric - ga).abs() / numeric.abs().max(ga.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{j}]: analytic {ga:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

/// Small random instance: d = 8, d_e = 8, five candidates, three relations.
pub fn gradient_instance(seed: u64) -> (Model, Vec<u32>, CandidateSet, Vec<GoldTriple>) {
    let mut rng = seeded(seed);
    let encoder = EncoderConfig {
        width: 8,
        vocab_size: 20,
        max_positions: 16,
        layers: vec![MixerKind::Window, MixerKind::Attention],
        ..EncoderConfig::toy(20)
    };
    let mut model = Model::new(ModelConfig { encoder, entity_width: 8, relations: 3 }, &mut rng).unwrap();
    // Scale up the link matrices so probabilities move away from 0.5 and
    // every gradient path carries signal.
    for u in &mut model.linker.links {
        u.mapv_inplace(|x| x * 3.0);
    }
    let ids: Vec<u32> = (0..6).map(|_| rng.gen_range(0..20)).collect();
    let spans = vec![Span::single(0), Span { start: 1, end: 2 }, Span::single(3), Span { start: 2, end: 5 }, Span::single(5)];
    let cands = CandidateSet { gold_mask: vec![false; spans.len()], spans: spans.clone(), max_len: 4, mode: CandidateMode::Train };
    let triples = vec![
        GoldTriple { head: spans[0], relation: 1, tail: spans[1] },
        GoldTriple { head: spans[3], relation: 0, tail: spans[2] },
        GoldTriple { head: spans[4], relation: 2, tail: spans[4] },
    ];
    (model, ids, cands, triples)
}
