//! Run configuration: a flat TOML table whose keys match the CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::AlignMode;
use crate::decoder::check_threshold;
use crate::encoder::{EncoderConfig, EncoderKind, MixerKind, PRETRAINED_WIDTH};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Named starting points for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Toy,
    NytStar,
    WebnlgStar,
    Nyt,
    Webnlg,
}

impl Profile {
    pub const ALL: [Profile; 5] = [Profile::Toy, Profile::NytStar, Profile::WebnlgStar, Profile::Nyt, Profile::Webnlg];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Toy => "toy",
            Profile::NytStar => "nyt-star",
            Profile::WebnlgStar => "webnlg-star",
            Profile::Nyt => "nyt",
            Profile::Webnlg => "webnlg",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown profile `{s}` (expected toy, nyt-star, webnlg-star, nyt or webnlg)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub encoder: EncoderKind,
    /// Token representation width `d`.
    pub width: usize,
    /// Comma-separated mixer stack of the toy encoder, e.g. `window,attention`.
    pub layers: String,
    /// Vocabulary budget when building a tokenizer from the training file.
    pub vocab_size: usize,
    /// One-piece-per-line vocabulary to use instead of building one.
    pub vocab_file: Option<PathBuf>,
    /// Hidden-state feature file for the pretrained adapter.
    pub features: Option<PathBuf>,
    pub entity_width: usize,
    pub c_train: usize,
    pub c_infer: usize,
    pub n_neg: usize,
    pub theta: f64,
    pub learning_rate: f64,
    /// Maximum global gradient norm per step; 0 disables clipping.
    pub grad_clip: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Evaluations without improvement before stopping; 0 never stops early.
    pub patience: usize,
    /// Epochs between validation passes; 0 disables validation.
    pub eval_every: usize,
    /// Stop as soon as validation F1 reaches this value.
    pub target_f1: Option<f64>,
    pub seed: u64,
    pub match_mode: AlignMode,
    pub output_dir: PathBuf,
    pub device: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::toy()
    }
}

impl RunConfig {
    /// Small CPU configuration for synthetic corpora.
    pub fn toy() -> Self {
        RunConfig {
            train: None,
            valid: None,
            encoder: EncoderKind::Toy,
            width: 32,
            layers: "window,attention".into(),
            vocab_size: 2000,
            vocab_file: None,
            features: None,
            entity_width: 32,
            c_train: 4,
            c_infer: 4,
            n_neg: 40,
            theta: 0.3,
            learning_rate: 3e-3,
            grad_clip: 1.0,
            batch_size: 8,
            epochs: 60,
            patience: 0,
            eval_every: 1,
            target_f1: None,
            seed: 13,
            match_mode: AlignMode::ExactSpan,
            output_dir: PathBuf::from("runs"),
            device: "cpu".into(),
        }
    }

    pub fn profile(profile: Profile) -> Self {
        let (batch, c_train, c_infer, mode) = match profile {
            Profile::Toy => return RunConfig::toy(),
            Profile::NytStar => (8, 9, 7, AlignMode::LastWord),
            Profile::WebnlgStar => (6, 6, 6, AlignMode::LastWord),
            Profile::Nyt => (8, 12, 11, AlignMode::ExactSpan),
            Profile::Webnlg => (6, 21, 20, AlignMode::ExactSpan),
        };
        RunConfig {
            encoder: EncoderKind::PretrainedAdapter,
            width: PRETRAINED_WIDTH,
            layers: String::new(),
            entity_width: 900,
            c_train,
            c_infer,
            n_neg: 100,
            theta: crate::decoder::DEFAULT_THRESHOLD,
            learning_rate: 1e-5,
            batch_size: batch,
            epochs: 100,
            patience: 5,
            match_mode: mode,
            ..RunConfig::toy()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mixer_layers(&self) -> Result<Vec<MixerKind>> {
        self.layers
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "window" => Ok(MixerKind::Window),
                "attention" => Ok(MixerKind::Attention),
                other => Err(Error::Config(format!("unknown mixer layer `{other}`"))),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning-rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::Config(format!("grad-clip must be non-negative, got {}", self.grad_clip)));
        }
        check_threshold(self.theta)?;
        for (name, v) in [
            ("width", self.width),
            ("entity-width", self.entity_width),
            ("c-train", self.c_train),
            ("c-infer", self.c_infer),
            ("batch-size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if let Some(t) = self.target_f1 {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("target-f1 must lie in [0, 1], got {t}")));
            }
        }
        if self.device != "cpu" {
            return Err(Error::Unavailable(format!("device `{}` (only `cpu` is supported)", self.device)));
        }
        self.mixer_layers()?;
        Ok(())
    }

    /// Settings that are legal but worth pointing out.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.c_infer < self.c_train {
            w.push(format!(
                "c-infer ({}) is below c-train ({}); longer gold entities cannot be predicted",
                self.c_infer, self.c_train
            ));
        }
        w
    }

    pub fn model_config(&self, vocab_size: usize, relations: usize) -> Result<ModelConfig> {
        let encoder = match self.encoder {
            EncoderKind::Toy => EncoderConfig { width: self.width, layers: self.mixer_layers()?, ..EncoderConfig::toy(vocab_size) },
            EncoderKind::PretrainedAdapter => EncoderConfig { width: self.width, ..EncoderConfig::pretrained() },
        };
        Ok(ModelConfig { encoder, entity_width: self.entity_width, relations })
    }

    /// Rejects an override that would change the shape of a trained model.
    pub fn check_compatible(&self, trained: &RunConfig) -> Result<()> {
        let pairs = [
            ("width", self.width.to_string(), trained.width.to_string()),
            ("entity-width", self.entity_width.to_string(), trained.entity_width.to_string()),
            ("layers", self.layers.clone(), trained.layers.clone()),
            ("encoder", format!("{:?}", self.encoder), format!("{:?}", trained.encoder)),
        ];
        for (name, mine, theirs) in pairs {
            if mine != theirs {
                return Err(Error::Shape(format!("{name}: requested {mine}, checkpoint has {theirs}")));
            }
        }
        Ok(())
    }
}
