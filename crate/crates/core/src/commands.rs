//! The operations behind each `triplink` subcommand. Each returns a summary
//! value and writes its artifacts under the configured output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::inference_set;
use crate::corpus::{
    align_records, dataset_stats, generate_synthetic, read_records, write_records, AlignMode, DatasetStats,
    LoadOptions, LoadReport, RawRecord, RelationSchema, Sentence, Span, SyntheticConfig, Tokenizer, Vocab,
    MAX_SEQUENCE_LEN,
};
use crate::decoder::{check_threshold, decode, read_predictions, write_predictions, PredictionRecord};
use crate::encoder::{EncoderKind, FeatureFileProvider};
use crate::error::{Error, Result};
use crate::evaluation::{
    error_taxonomy, gold_from_record, length_distribution, micro_prf, pair_by_id, pred_from_record, split_report,
    subtask_report, timing_harness, EvalReport, EvalSentence, ErrorTaxonomy, LengthDistribution, SplitBy,
    SubtaskReport, TimingReport,
};
use crate::linker::LinkScoreTensor;
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint, Model};
use crate::rng::seeded;
use crate::train::{train, LogEntry, RunConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn attach_features(model: &mut Model, features: Option<&Path>) -> Result<()> {
    if model.config.encoder.kind != EncoderKind::PretrainedAdapter {
        return Ok(());
    }
    match features {
        Some(p) => model.attach_provider(Arc::new(FeatureFileProvider::open(p)?)),
        None => Err(Error::Unavailable(
            "pretrained-adapter runs need a hidden-state feature file (`features`)".into(),
        )),
    }
}

/// Tokenizes raw records with a fixed tokenizer and schema, keeping gold triples.
pub fn align_with(records: &[RawRecord], tokenizer: &Tokenizer, schema: &RelationSchema, mode: AlignMode) -> Result<(Vec<Sentence>, LoadReport)> {
    let ds = align_records(records, tokenizer, LoadOptions { mode, max_len: MAX_SEQUENCE_LEN }, Some(schema))?;
    Ok((ds.sentences, ds.report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub train_sentences: usize,
    pub valid_sentences: usize,
    pub parameters: usize,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_f1: Option<f64>,
}

/// Trains from `cfg.train` (and `cfg.valid`), writing the checkpoint, the
/// training log and the resolved configuration to `cfg.output_dir`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    for w in cfg.warnings() {
        warn!("{w}");
    }
    let train_path = cfg.train.as_ref().ok_or_else(|| Error::Config("`train` dataset path is required".into()))?;
    let train_records = read_records(train_path)?;
    if train_records.is_empty() {
        return Err(Error::EmptyInput("training file has no records"));
    }
    let vocab = match &cfg.vocab_file {
        Some(path) => Vocab::from_file(path)?,
        None => Vocab::build(train_records.iter().map(|r| r.text.as_str()), cfg.vocab_size),
    };
    let tokenizer = Tokenizer::new(vocab);
    let ds = align_records(&train_records, &tokenizer, LoadOptions { mode: cfg.match_mode, max_len: MAX_SEQUENCE_LEN }, None)?;
    info!("training data: {:?}", ds.report);
    let schema = ds.schema;
    let valid = match &cfg.valid {
        Some(p) => {
            let (s, report) = align_with(&read_records(p)?, &tokenizer, &schema, cfg.match_mode)?;
            info!("validation data: {report:?}");
            Some(s)
        }
        None => None,
    };

    let mut model = Model::new(cfg.model_config(tokenizer.vocab().len(), schema.len())?, &mut seeded(cfg.seed))?;
    attach_features(&mut model, cfg.features.as_deref())?;

    ensure_dir(&cfg.output_dir)?;
    let log_path = cfg.output_dir.join(TRAIN_LOG_FILE);
    let mut log_file = std::io::BufWriter::new(fs::File::create(&log_path)?);
    let mut write_err = None;
    let outcome = train(&mut model, &ds.sentences, valid.as_deref(), &schema, cfg, |e: &LogEntry| {
        if let LogEntry::Eval { epoch, f1, .. } = e {
            info!("epoch {epoch}: F1 {f1:.4}");
        }
        if let Err(err) = serde_json::to_writer(&mut log_file, e).map_err(Error::from).and_then(|_| Ok(log_file.write_all(b"\n")?)) {
            write_err.get_or_insert(err);
        }
    })?;
    if let Some(err) = write_err {
        return Err(err);
    }
    log_file.flush()?;

    let ckpt_path = cfg.output_dir.join(CHECKPOINT_FILE);
    let parameters = outcome.model.parameter_count();
    save_checkpoint(&ckpt_path, &Checkpoint { model: outcome.model, schema, tokenizer, run_config: cfg.clone() })?;
    fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(TrainSummary {
        checkpoint: ckpt_path,
        log: log_path,
        train_sentences: ds.sentences.len(),
        valid_sentences: valid.as_ref().map_or(0, Vec::len),
        parameters,
        epochs_run: outcome.epochs_run,
        best_epoch: outcome.best_epoch,
        best_f1: outcome.best_f1,
    })
}

/// Inference-time settings; unset fields fall back to the checkpoint's run configuration.
#[derive(Clone, Debug, Default)]
pub struct InferenceOptions {
    pub c_infer: Option<usize>,
    pub theta: Option<f64>,
    pub features: Option<PathBuf>,
    /// A run configuration the caller expects the checkpoint to match.
    pub expect: Option<RunConfig>,
}

/// A loaded checkpoint with resolved inference settings.
pub struct Predictor {
    pub checkpoint: Checkpoint,
    pub c_infer: usize,
    pub theta: f64,
}

impl Predictor {
    pub fn open(path: impl AsRef<Path>, opts: &InferenceOptions) -> Result<Self> {
        let mut checkpoint = load_checkpoint(path)?;
        if let Some(expect) = &opts.expect {
            expect.check_compatible(&checkpoint.run_config)?;
        }
        let features = opts.features.clone().or_else(|| checkpoint.run_config.features.clone());
        attach_features(&mut checkpoint.model, features.as_deref())?;
        let c_infer = opts.c_infer.unwrap_or(checkpoint.run_config.c_infer);
        let theta = opts.theta.unwrap_or(checkpoint.run_config.theta);
        check_threshold(theta)?;
        if c_infer == 0 {
            return Err(Error::Config("c-infer must be at least 1".into()));
        }
        Ok(Predictor { checkpoint, c_infer, theta })
    }

    /// Tokenized sentences for raw records; gold triples are ignored.
    pub fn sentences(&self, records: &[RawRecord]) -> Result<Vec<Sentence>> {
        let bare: Vec<RawRecord> = records.iter().map(|r| RawRecord { triple_list: Vec::new(), ..r.clone() }).collect();
        Ok(align_with(&bare, &self.checkpoint.tokenizer, &self.checkpoint.schema, AlignMode::ExactSpan)?.0)
    }

    pub fn predict(&self, sentences: &[Sentence]) -> Result<Vec<PredictionRecord>> {
        let model = &self.checkpoint.model;
        sentences
            .par_iter()
            .map(|s| {
                let triples = crate::decoder::predict_sentence(s, model, self.c_infer, self.theta)?;
                Ok(PredictionRecord::new(s, &triples, &self.checkpoint.schema))
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictSummary {
    pub output: PathBuf,
    pub sentences: usize,
    pub triples: usize,
}

pub fn cmd_predict(checkpoint: &Path, input: &Path, output: &Path, opts: &InferenceOptions) -> Result<PredictSummary> {
    let predictor = Predictor::open(checkpoint, opts)?;
    let records = read_records(input)?;
    let sentences = predictor.sentences(&records)?;
    let predictions = predictor.predict(&sentences)?;
    if let Some(parent) = output.parent() {
        ensure_dir(parent)?;
    }
    write_predictions(output, &predictions)?;
    Ok(PredictSummary {
        output: output.to_path_buf(),
        sentences: predictions.len(),
        triples: predictions.iter().map(|r| r.triples.len()).sum(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub match_mode: AlignMode,
    pub splits: bool,
    pub subtasks: bool,
    pub taxonomy: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub main: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern_splits: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_splits: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtasks: Option<SubtaskReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<ErrorTaxonomy>,
}

impl std::fmt::Display for EvalSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut main = self.main.clone();
        for r in [&self.pattern_splits, &self.count_splits].into_iter().flatten() {
            main.per_split.extend(r.per_split.clone());
        }
        write!(f, "{main}")?;
        if let Some(s) = &self.subtasks {
            write!(f, "\n{s}")?;
        }
        if let Some(t) = &self.taxonomy {
            write!(f, "\n{t}")?;
        }
        Ok(())
    }
}

fn record_id(r: &RawRecord, n: usize) -> String {
    r.id.clone().unwrap_or_else(|| n.to_string())
}

/// Compares a prediction file against a gold dataset file.
pub fn evaluate_files(gold: &Path, predictions: &Path, mode: AlignMode) -> Result<Vec<EvalSentence>> {
    let gold: Vec<(String, _)> = read_records(gold)?
        .iter()
        .enumerate()
        .map(|(n, r)| (record_id(r, n), gold_from_record(r, mode)))
        .collect();
    let pred = read_predictions(predictions)?.iter().map(|r| (r.id.clone(), pred_from_record(r))).collect();
    pair_by_id(gold, pred)
}

pub fn cmd_eval(gold: &Path, predictions: &Path, opts: &EvalOptions) -> Result<EvalSummary> {
    let compared = evaluate_files(gold, predictions, opts.match_mode)?;
    let mode = opts.match_mode;
    let summary = EvalSummary {
        main: micro_prf(&compared, mode),
        pattern_splits: opts.splits.then(|| split_report(&compared, SplitBy::Pattern, mode)),
        count_splits: opts.splits.then(|| split_report(&compared, SplitBy::TripleCount, mode)),
        subtasks: opts.subtasks.then(|| subtask_report(&compared, mode)),
        taxonomy: opts.taxonomy.then(|| error_taxonomy(&compared, mode)),
    };
    if let Some(dir) = &opts.output_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("eval.json"), &summary)?;
        fs::write(dir.join("eval.txt"), summary.to_string())?;
    }
    Ok(summary)
}

/// Link scores of one gold-annotated sentence, cached for threshold sweeps.
pub struct ScoredSentence {
    pub sentence: Sentence,
    pub spans: Vec<Span>,
    pub scores: LinkScoreTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub best_theta: f64,
    pub best_f1: f64,
}

/// Parses `a,b,c` or `start:stop:step` (inclusive of `stop`).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::Config(format!("threshold grid `{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, s] = parts[..] else { return Err(bad("expected start:stop:step")) };
        let (a, b, s) = (num(a)?, num(b)?, num(s)?);
        if !(s > 0.0) || b < a {
            return Err(bad("step must be positive and stop at least start"));
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        (0..=n).map(|i| ((a + i as f64 * s) * 1e9).round() / 1e9).collect()
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty grid"));
    }
    Ok(grid)
}

/// F1 at every grid point; ties go to the larger threshold.
pub fn sweep_theta(scored: &[ScoredSentence], schema: &RelationSchema, grid: &[f64], mode: AlignMode) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &theta in grid {
        check_threshold(theta)?;
        let compared: Vec<EvalSentence> = scored
            .iter()
            .map(|s| Ok(EvalSentence::from_spans(&s.sentence, &decode(&s.scores, &s.spans, theta)?, schema)))
            .collect::<Result<_>>()?;
        let r = micro_prf(&compared, mode);
        points.push(SweepPoint { theta, precision: r.precision, recall: r.recall, f1: r.f1 });
    }
    let best = points
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1).then(a.theta.total_cmp(&b.theta)))
        .expect("grid is non-empty");
    Ok(SweepResult { best_theta: best.theta, best_f1: best.f1, points })
}

pub fn cmd_sweep_theta(
    checkpoint: &Path,
    gold: &Path,
    grid: &[f64],
    opts: &InferenceOptions,
    mode: Option<AlignMode>,
) -> Result<SweepResult> {
    let predictor = Predictor::open(checkpoint, opts)?;
    let ckpt = &predictor.checkpoint;
    let mode = mode.unwrap_or(ckpt.run_config.match_mode);
    let (sentences, report) = align_with(&read_records(gold)?, &ckpt.tokenizer, &ckpt.schema, mode)?;
    if report.skipped_unalignable + report.skipped_unknown_relation > 0 {
        warn!("sweep skips {} unalignable sentences", report.skipped_unalignable + report.skipped_unknown_relation);
    }
    let scored: Vec<ScoredSentence> = sentences
        .into_par_iter()
        .map(|sentence| {
            let spans = inference_set(&sentence, predictor.c_infer)?.spans;
            let scores = ckpt.model.score_spans(&sentence.token_ids, &spans)?;
            Ok(ScoredSentence { sentence, spans, scores })
        })
        .collect::<Result<_>>()?;
    sweep_theta(&scored, &ckpt.schema, grid, mode)
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub load: LoadReport,
    pub stats: DatasetStats,
    pub lengths: LengthDistribution,
}

impl std::fmt::Display for AnalyzeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.stats)?;
        write!(f, "{}", self.lengths)
    }
}

/// Corpus statistics and the gold entity length histogram. With a
/// checkpoint, entity lengths are measured in its tokenizer's pieces.
pub fn cmd_analyze(dataset: &Path, mode: AlignMode, vocab_size: usize, checkpoint: Option<&Path>, histogram_svg: Option<&Path>) -> Result<AnalyzeReport> {
    let records = read_records(dataset)?;
    let ds = match checkpoint {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            align_records(&records, &ckpt.tokenizer, LoadOptions { mode, max_len: MAX_SEQUENCE_LEN }, None)?
        }
        None => {
            let tokenizer = Tokenizer::new(Vocab::build(records.iter().map(|r| r.text.as_str()), vocab_size));
            align_records(&records, &tokenizer, LoadOptions { mode, max_len: MAX_SEQUENCE_LEN }, None)?
        }
    };
    let report = AnalyzeReport { stats: dataset_stats(&ds.sentences), lengths: length_distribution(&ds.sentences), load: ds.report };
    if let Some(path) = histogram_svg {
        fs::write(path, histogram_svg_text(&report.lengths))?;
    }
    Ok(report)
}

/// A bar chart of the entity length histogram as standalone SVG.
pub fn histogram_svg_text(d: &LengthDistribution) -> String {
    let max_len = d.histogram.keys().copied().max().unwrap_or(1);
    let peak = d.histogram.values().copied().max().unwrap_or(1).max(1) as f64;
    let (bar, gap, height, pad) = (24.0, 6.0, 200.0, 30.0);
    let width = pad * 2.0 + max_len as f64 * (bar + gap);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"10\">\n",
        height + pad * 2.0
    );
    for len in 1..=max_len {
        let n = d.histogram.get(&len).copied().unwrap_or(0);
        let h = height * n as f64 / peak;
        let x = pad + (len - 1) as f64 * (bar + gap);
        let y = pad + height - h;
        svg += &format!("<rect x=\"{x}\" y=\"{y}\" width=\"{bar}\" height=\"{h}\" fill=\"#4878a8\"><title>{len}: {n}</title></rect>\n");
        svg += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{len}</text>\n", x + bar / 2.0, pad + height + 12.0);
    }
    svg += "</svg>\n";
    svg
}

pub fn cmd_bench(checkpoint: &Path, dataset: &Path, repetitions: usize, warmup: usize, opts: &InferenceOptions) -> Result<TimingReport> {
    let predictor = Predictor::open(checkpoint, opts)?;
    let sentences = predictor.sentences(&read_records(dataset)?)?;
    timing_harness(&predictor.checkpoint.model, &sentences, predictor.c_infer, predictor.theta, repetitions, warmup)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSummary {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub relations: Vec<String>,
}

/// Writes a synthetic corpus as `train.json`, plus `test.json` holding the
/// last `holdout` sentences when `holdout > 0`.
pub fn cmd_synth(config: &SyntheticConfig, holdout: usize, output_dir: &Path) -> Result<SynthSummary> {
    if holdout >= config.sentences {
        return Err(Error::Config(format!("holdout {holdout} leaves no training sentences out of {}", config.sentences)));
    }
    let corpus = generate_synthetic(config)?;
    ensure_dir(output_dir)?;
    let split = corpus.records.len() - holdout;
    let train = output_dir.join("train.json");
    write_records(&train, &corpus.records[..split])?;
    let test = if holdout > 0 {
        let p = output_dir.join("test.json");
        write_records(&p, &corpus.records[split..])?;
        Some(p)
    } else {
        None
    };
    Ok(SynthSummary {
        train,
        test,
        train_sentences: split,
        test_sentences: holdout,
        relations: corpus.schema.names().to_vec(),
    })
}

/// Writes `value` as pretty JSON to `<dir>/<name>`.
pub fn write_report<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let p = dir.join(name);
    write_json(&p, value)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::DEFAULT_THRESHOLD;
    use ndarray::Array3;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0.3:0.7:0.1").unwrap(), vec![0.3, 0.4, 0.5, 0.6, 0.7]);
        assert_eq!(parse_grid("0.2, 0.4").unwrap(), vec![0.2, 0.4]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0.7:0.3:0.1").is_err());
    }

    fn separated() -> (Vec<ScoredSentence>, RelationSchema) {
        let sentence = Sentence {
            id: "0".into(),
            text: "a b".into(),
            tokens: vec!["a".into(), "b".into()],
            token_ids: vec![1, 2],
            offsets: vec![(0, 1), (2, 3)],
            gold_triples: vec![crate::GoldTriple { head: Span::single(0), relation: 0, tail: Span::single(1) }],
        };
        let spans = vec![Span::single(0), Span::single(1)];
        let mut probs = Array3::from_elem((2, 1, 2), 0.1);
        probs[[0, 0, 1]] = 0.9;
        (vec![ScoredSentence { sentence, spans, scores: LinkScoreTensor::from_probs(probs) }], RelationSchema::new(vec!["r".into()]).unwrap())
    }

    #[test]
    fn sweep_single_point() {
        let (scored, schema) = separated();
        let r = sweep_theta(&scored, &schema, &[DEFAULT_THRESHOLD], AlignMode::ExactSpan).unwrap();
        assert_eq!(r.best_theta, 0.5);
    }

    #[test]
    fn sweep_ties_go_to_larger_theta() {
        let (scored, schema) = separated();
        let grid = parse_grid("0.05:0.95:0.1").unwrap();
        let r = sweep_theta(&scored, &schema, &grid, AlignMode::ExactSpan).unwrap();
        assert_eq!(r.best_f1, 1.0);
        assert_eq!(r.best_theta, 0.85);
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        let (scored, schema) = separated();
        assert!(sweep_theta(&scored, &schema, &[], AlignMode::ExactSpan).is_err());
    }

    #[test]
    fn histogram_svg_has_one_bar_per_length() {
        let d = LengthDistribution {
            histogram: [(1, 3), (3, 1)].into_iter().collect(),
            total: 4,
            c_at_95: 3,
            c_at_99: 3,
            c_at_100: 3,
        };
        assert_eq!(histogram_svg_text(&d).matches("<rect").count(), 3);
    }
}
