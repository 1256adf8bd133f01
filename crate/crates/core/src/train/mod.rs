//! Mini-batch training of the extractor.
//!
//! Each epoch visits the training sentences in a seeded shuffle. Every
//! sentence draws fresh negative candidates from its own random stream, so a
//! run is reproducible regardless of how batches are spread over threads.

mod adam;
mod config;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::sample_training_set;
use crate::corpus::{AlignMode, RelationSchema, Sentence};
use crate::decoder::predict_sentence;
use crate::error::{Error, Result};
use crate::evaluation::{micro_prf, EvalReport, EvalSentence};
use crate::model::{Gradients, Model};
use crate::rng::{seeded, sentence_stream};

pub use adam::Adam;
pub use config::{Profile, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LogEntry {
    Step { epoch: usize, step: usize, loss: f64 },
    Eval { epoch: usize, precision: f64, recall: f64, f1: f64 },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best evaluation F1, or the final ones when no
    /// evaluation ran.
    pub model: Model,
    pub log: Vec<LogEntry>,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_f1: Option<f64>,
}

impl TrainOutcome {
    /// First epoch whose evaluation F1 reached `threshold`.
    pub fn first_epoch_reaching(&self, threshold: f64) -> Option<usize> {
        self.log.iter().find_map(|e| match e {
            LogEntry::Eval { epoch, f1, .. } if *f1 >= threshold => Some(*epoch),
            _ => None,
        })
    }
}

/// Scores `sentences` with `model` at the given candidate length and threshold.
pub fn evaluate_model(
    model: &Model,
    sentences: &[Sentence],
    schema: &RelationSchema,
    max_len: usize,
    theta: f64,
    mode: AlignMode,
) -> Result<EvalReport> {
    let compared: Vec<EvalSentence> = sentences
        .par_iter()
        .map(|s| Ok(EvalSentence::from_spans(s, &predict_sentence(s, model, max_len, theta)?, schema)))
        .collect::<Result<_>>()?;
    Ok(micro_prf(&compared, mode))
}

fn batch_gradient(model: &Model, batch: &[&Sentence], cfg: &RunConfig, epoch: usize) -> Result<(f64, Gradients)> {
    let parts: Vec<(f64, Gradients)> = batch
        .par_iter()
        .map(|s| {
            let mut rng = sentence_stream(cfg.seed, &s.id, epoch as u64);
            let cands = sample_training_set(s, cfg.c_train, cfg.n_neg, &mut rng)?;
            model.loss_and_grad(&s.token_ids, &cands, &s.gold_triples)
        })
        .collect::<Result<_>>()?;
    let mut total = model.zero_gradients();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

/// Trains `model` in place on `train` and returns the selected parameters.
///
/// Evaluation uses `valid` when given and the training set otherwise.
/// `on_event` sees every log entry as it is produced.
pub fn train(
    model: &mut Model,
    train: &[Sentence],
    valid: Option<&[Sentence]>,
    schema: &RelationSchema,
    cfg: &RunConfig,
    mut on_event: impl FnMut(&LogEntry),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() && cfg.epochs > 0 {
        return Err(Error::EmptyInput("training set has no sentences"));
    }
    let eval_set = valid.unwrap_or(train);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<&Sentence> = train.iter().collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut stale = 0usize;
    let mut step = 0usize;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.epochs {
        order.sort_by(|a, b| a.id.cmp(&b.id));
        order.shuffle(&mut seeded(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9)));
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, mut grads) = batch_gradient(model, batch, cfg, epoch)?;
            if !loss.is_finite() {
                let ids: Vec<&str> = batch.iter().map(|s| s.id.as_str()).collect();
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {b} (sentences {ids:?})")));
            }
            let norm = grads.global_norm();
            if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / norm);
            }
            opt.update(model.tensors_mut().into_iter().map(|(_, t)| t).collect(), grads.tensors().into_iter().map(|(_, t)| t).collect());
            step += 1;
            let entry = LogEntry::Step { epoch, step, loss };
            on_event(&entry);
            log.push(entry);
        }
        epochs_run = epoch;

        if cfg.eval_every == 0 || epoch % cfg.eval_every != 0 || eval_set.is_empty() {
            continue;
        }
        let r = evaluate_model(model, eval_set, schema, cfg.c_infer, cfg.theta, cfg.match_mode)?;
        let entry = LogEntry::Eval { epoch, precision: r.precision, recall: r.recall, f1: r.f1 };
        on_event(&entry);
        log.push(entry);
        if best.as_ref().is_none_or(|(f, _, _)| r.f1 > *f) {
            best = Some((r.f1, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if cfg.target_f1.is_some_and(|t| r.f1 >= t) || (cfg.patience > 0 && stale >= cfg.patience) {
            break;
        }
    }

    let (best_f1, best_epoch, selected) = match best {
        Some((f, e, m)) => (Some(f), Some(e), m),
        None => (None, None, model.clone()),
    };
    Ok(TrainOutcome { model: selected, log, epochs_run, best_epoch, best_f1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, PatternMix, SyntheticConfig};

    fn small() -> (crate::corpus::SyntheticCorpus, RunConfig) {
        let corpus = generate_synthetic(&SyntheticConfig {
            sentences: 12,
            mix: PatternMix::NORMAL_ONLY,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let cfg = RunConfig { epochs: 2, ..RunConfig::toy() };
        (corpus, cfg)
    }

    fn fresh(corpus: &crate::corpus::SyntheticCorpus, cfg: &RunConfig) -> Model {
        let mc = cfg.model_config(corpus.tokenizer.vocab().len(), corpus.schema.len()).unwrap();
        Model::new(mc, &mut seeded(cfg.seed)).unwrap()
    }

    #[test]
    fn zero_epochs_keeps_initial_parameters() {
        let (corpus, cfg) = small();
        let cfg = RunConfig { epochs: 0, ..cfg };
        let mut m = fresh(&corpus, &cfg);
        let before = m.clone();
        let out = train(&mut m, &corpus.sentences, None, &corpus.schema, &cfg, |_| {}).unwrap();
        assert_eq!(out.epochs_run, 0);
        assert!(out.log.is_empty());
        for ((_, a), (_, b)) in before.tensors().into_iter().zip(out.model.tensors()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn logs_every_step_and_eval() {
        let (corpus, cfg) = small();
        let mut m = fresh(&corpus, &cfg);
        let out = train(&mut m, &corpus.sentences, None, &corpus.schema, &cfg, |_| {}).unwrap();
        let steps = out.log.iter().filter(|e| matches!(e, LogEntry::Step { .. })).count();
        let evals = out.log.iter().filter(|e| matches!(e, LogEntry::Eval { .. })).count();
        assert_eq!(steps, 2 * corpus.sentences.len().div_ceil(cfg.batch_size));
        assert_eq!(evals, 2);
    }

    #[test]
    fn training_is_deterministic() {
        let (corpus, cfg) = small();
        let run = || {
            let mut m = fresh(&corpus, &cfg);
            train(&mut m, &corpus.sentences, None, &corpus.schema, &cfg, |_| {}).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.log, b.log);
        for ((_, x), (_, y)) in a.model.tensors().into_iter().zip(b.model.tensors()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn loss_decreases_on_a_tiny_corpus() {
        let (corpus, cfg) = small();
        let cfg = RunConfig { epochs: 30, eval_every: 0, ..cfg };
        let mut m = fresh(&corpus, &cfg);
        let out = train(&mut m, &corpus.sentences, None, &corpus.schema, &cfg, |_| {}).unwrap();
        let losses: Vec<f64> = out
            .log
            .iter()
            .filter_map(|e| match e {
                LogEntry::Step { loss, .. } => Some(*loss),
                _ => None,
            })
            .collect();
        let head: f64 = losses[..2].iter().sum();
        let tail: f64 = losses[losses.len() - 2..].iter().sum();
        assert!(tail < head * 0.5, "{head} -> {tail}");
    }

    #[test]
    fn non_finite_parameters_abort_with_batch_id() {
        let (corpus, cfg) = small();
        let mut m = fresh(&corpus, &cfg);
        m.linker.links[0].fill(f64::NAN);
        let err = train(&mut m, &corpus.sentences, None, &corpus.schema, &cfg, |_| {}).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-finite"), "{msg}");
    }
}
