//! The whole command pipeline in a temporary directory: synth, train, predict,
//! eval, sweep-theta, analyze and bench.
//!
//! cargo run --release --example pipeline -- [epochs]

use triplink::commands::{
    cmd_analyze, cmd_bench, cmd_eval, cmd_predict, cmd_sweep_theta, cmd_synth, cmd_train, parse_grid, EvalOptions, InferenceOptions,
    CHECKPOINT_FILE,
};
use triplink::corpus::{AlignMode, SyntheticConfig};
use triplink::train::RunConfig;

fn main() -> triplink::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let dir = tempfile::tempdir()?;
    let root = dir.path();

    let data = cmd_synth(&SyntheticConfig { sentences: 300, ..SyntheticConfig::default() }, 60, &root.join("data"))?;
    let test = data.test.clone().expect("holdout requested");
    println!("synth: {} train / {} test sentences", data.train_sentences, data.test_sentences);

    let cfg = RunConfig { train: Some(data.train.clone()), valid: Some(test.clone()), epochs, eval_every: 5, output_dir: root.join("run"), ..RunConfig::toy() };
    let trained = cmd_train(&cfg)?;
    println!("train: {} epochs, best validation F1 {:?} at epoch {:?}", trained.epochs_run, trained.best_f1, trained.best_epoch);

    let ckpt = root.join("run").join(CHECKPOINT_FILE);
    let preds = root.join("predictions.json");
    let opts = InferenceOptions::default();
    let p = cmd_predict(&ckpt, &test, &preds, &opts)?;
    println!("predict: {p:?}");

    let summary = cmd_eval(&test, &preds, &EvalOptions { match_mode: AlignMode::ExactSpan, splits: true, subtasks: true, taxonomy: true, output_dir: None })?;
    println!("\n{summary}");

    let sweep = cmd_sweep_theta(&ckpt, &test, &parse_grid("0.1:0.9:0.1")?, &opts, None)?;
    for pt in &sweep.points {
        println!("theta {:.1}  F1 {:.4}", pt.theta, pt.f1);
    }
    println!("best theta {} (F1 {:.4})\n", sweep.best_theta, sweep.best_f1);

    println!("{}", cmd_analyze(&data.train, AlignMode::ExactSpan, cfg.vocab_size, Some(&ckpt), None)?);
    let timing = cmd_bench(&ckpt, &test, 3, 1, &opts)?;
    println!("bench: {:.2} ms +- {:.2} per pass over {} sentences", timing.mean_ms, timing.stddev_ms, timing.sentences);
    Ok(())
}
