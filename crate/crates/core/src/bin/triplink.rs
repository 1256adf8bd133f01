use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use triplink::commands::{self, EvalOptions, InferenceOptions};
use triplink::corpus::{AlignMode, PatternMix, SyntheticConfig};
use triplink::encoder::EncoderKind;
use triplink::train::{Profile, RunConfig};

#[derive(Parser)]
#[command(name = "triplink", version, about = "Relational triple extraction by linking candidate spans")]
struct Cli {
    /// Directory for checkpoints, logs and reports.
    #[arg(long, global = true, env = "TRIPLINK_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "TRIPLINK_SEED")]
    seed: Option<u64>,
    /// Compute device; only `cpu` is available.
    #[arg(long, global = true, env = "TRIPLINK_DEVICE")]
    device: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an extractor and write a checkpoint.
    Train(TrainArgs),
    /// Extract triples from a dataset file with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<output-dir>/predictions.json`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        infer: InferArgs,
    },
    /// Score a prediction file against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "exact-span")]
        match_mode: AlignMode,
        /// Add per-pattern and per-triple-count reports.
        #[arg(long)]
        splits: bool,
        /// Add entity-pair and relation sub-task reports.
        #[arg(long)]
        subtasks: bool,
        /// Add the entity error taxonomy.
        #[arg(long)]
        taxonomy: bool,
        #[arg(long)]
        json: bool,
    },
    /// Pick the decoding threshold that maximizes F1 on a validation file.
    SweepTheta {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// `a,b,c` or `start:stop:step`.
        #[arg(long, default_value = "0.1:0.9:0.1")]
        grid: String,
        #[arg(long)]
        match_mode: Option<AlignMode>,
        #[command(flatten)]
        infer: InferArgs,
    },
    /// Corpus statistics and the gold entity length distribution.
    Analyze {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "exact-span")]
        match_mode: AlignMode,
        #[arg(long, default_value_t = 30000)]
        vocab_size: usize,
        /// Measure entity lengths with this checkpoint's tokenizer.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the length histogram as an SVG bar chart.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Time per-sentence inference.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[command(flatten)]
        infer: InferArgs,
    },
    /// Generate a synthetic annotated corpus.
    Synth {
        #[arg(long, default_value_t = 1000)]
        sentences: usize,
        /// Sentences moved to `test.json`.
        #[arg(long, default_value_t = 0)]
        holdout: usize,
        #[arg(long, default_value_t = 40)]
        entities: usize,
        #[arg(long, default_value_t = 96)]
        word_pool: usize,
        #[arg(long, default_value_t = 6)]
        relations: usize,
        #[arg(long, default_value_t = 1)]
        max_entity_words: usize,
        /// Normal,EPO,SEO,HTO shares summing to 1.
        #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
        mix: String,
    },
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    c_infer: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Refuse to run unless the checkpoint matches this run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl InferArgs {
    fn options(&self) -> triplink::Result<InferenceOptions> {
        Ok(InferenceOptions {
            c_infer: self.c_infer,
            theta: self.theta,
            features: self.features.clone(),
            expect: self.config.as_ref().map(RunConfig::load).transpose()?,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting defaults: toy, nyt-star, webnlg-star, nyt or webnlg.
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long, value_parser = parse_encoder)]
    encoder: Option<EncoderKind>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    vocab_file: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    entity_width: Option<usize>,
    #[arg(long)]
    c_train: Option<usize>,
    #[arg(long)]
    c_infer: Option<usize>,
    #[arg(long)]
    n_neg: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    target_f1: Option<f64>,
    #[arg(long)]
    match_mode: Option<AlignMode>,
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    match s {
        "toy" => Ok(EncoderKind::Toy),
        "pretrained-adapter" => Ok(EncoderKind::PretrainedAdapter),
        _ => Err(format!("expected `toy` or `pretrained-adapter`, got `{s}`")),
    }
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v.into(); })*
    };
}

impl TrainArgs {
    fn resolve(&self, cli: &Cli) -> triplink::Result<RunConfig> {
        let mut cfg = match (&self.config, self.profile) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)?;
                // A profile named on the command line supplies the defaults the file omits.
                let mut base = toml::Table::try_from(RunConfig::profile(self.profile.unwrap_or(Profile::Toy)))
                    .map_err(|e| triplink::Error::Config(e.to_string()))?;
                let file: toml::Table = text.parse().map_err(|e: toml::de::Error| triplink::Error::Config(format!("{}: {}", path.display(), e.message())))?;
                base.extend(file);
                RunConfig::from_toml_str(&toml::to_string(&base).map_err(|e| triplink::Error::Config(e.to_string()))?)?
            }
            (None, p) => RunConfig::profile(p.unwrap_or(Profile::Toy)),
        };
        overlay!(cfg, self, train, valid, vocab_file, features, target_f1);
        overlay!(cfg, self, encoder, width, layers, vocab_size, entity_width, c_train, c_infer, n_neg, theta);
        overlay!(cfg, self, learning_rate, grad_clip, batch_size, epochs, patience, eval_every, match_mode);
        if let Some(v) = &cli.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = cli.seed {
            cfg.seed = v;
        }
        if let Some(v) = &cli.device {
            cfg.device = v.clone();
        }
        Ok(cfg)
    }
}

fn check_device(cli: &Cli) -> triplink::Result<()> {
    match cli.device.as_deref() {
        None | Some("cpu") => Ok(()),
        Some(other) => Err(triplink::Error::Unavailable(format!("device `{other}` (only `cpu` is supported)"))),
    }
}

fn output_dir(cli: &Cli) -> PathBuf {
    cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn print_json<T: Serialize>(value: &T) -> triplink::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn parse_mix(s: &str) -> triplink::Result<PatternMix> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| triplink::Error::Config(format!("mix `{s}`: not a number"))))
        .collect::<triplink::Result<_>>()?;
    let [normal, epo, seo, hto] = parts[..] else {
        return Err(triplink::Error::Config(format!("mix `{s}`: expected four shares")));
    };
    Ok(PatternMix { normal, epo, seo, hto })
}

fn run(cli: &Cli) -> triplink::Result<()> {
    match &cli.command {
        Command::Train(args) => {
            let cfg = args.resolve(cli)?;
            print_json(&commands::cmd_train(&cfg)?)
        }
        Command::Predict { checkpoint, input, output, infer } => {
            check_device(cli)?;
            let output = output.clone().unwrap_or_else(|| output_dir(cli).join("predictions.json"));
            print_json(&commands::cmd_predict(checkpoint, input, &output, &infer.options()?)?)
        }
        Command::Eval { gold, predictions, match_mode, splits, subtasks, taxonomy, json } => {
            let opts = EvalOptions {
                match_mode: *match_mode,
                splits: *splits,
                subtasks: *subtasks,
                taxonomy: *taxonomy,
                output_dir: Some(output_dir(cli)),
            };
            let summary = commands::cmd_eval(gold, predictions, &opts)?;
            if *json {
                print_json(&summary)
            } else {
                print!("{summary}");
                Ok(())
            }
        }
        Command::SweepTheta { checkpoint, gold, grid, match_mode, infer } => {
            check_device(cli)?;
            let grid = commands::parse_grid(grid)?;
            let result = commands::cmd_sweep_theta(checkpoint, gold, &grid, &infer.options()?, *match_mode)?;
            commands::write_report(&output_dir(cli), "sweep.json", &result)?;
            print_json(&result)
        }
        Command::Analyze { dataset, match_mode, vocab_size, checkpoint, histogram, json } => {
            let report = commands::cmd_analyze(dataset, *match_mode, *vocab_size, checkpoint.as_deref(), histogram.as_deref())?;
            commands::write_report(&output_dir(cli), "analyze.json", &report)?;
            if *json {
                print_json(&report)
            } else {
                print!("{report}");
                Ok(())
            }
        }
        Command::Bench { checkpoint, dataset, repetitions, warmup, infer } => {
            check_device(cli)?;
            let report = commands::cmd_bench(checkpoint, dataset, *repetitions, *warmup, &infer.options()?)?;
            commands::write_report(&output_dir(cli), "bench.json", &report)?;
            print_json(&report)
        }
        Command::Synth { sentences, holdout, entities, word_pool, relations, max_entity_words, mix } => {
            let config = SyntheticConfig {
                sentences: *sentences,
                entities: *entities,
                vocab_size: *word_pool,
                relations: *relations,
                max_entity_words: *max_entity_words,
                mix: parse_mix(mix)?,
                seed: cli.seed.unwrap_or(SyntheticConfig::default().seed),
            };
            print_json(&commands::cmd_synth(&config, *holdout, &output_dir(cli))?)
        }
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": one_line(first.trim_start_matches("error: ")) }));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": one_line(&e.to_string()) });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

