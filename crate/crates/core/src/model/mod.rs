//! The composed extractor: encoder, entity representation and linker, plus
//! the flat parameter view used by the optimizer and checkpoints.

mod checkpoint;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::corpus::{GoldTriple, Span};
use crate::encoder::{entity_repr, entity_repr_backward, Encoder, EncoderConfig, EncoderKind, HiddenStateProvider, ToyEncoder, UnavailableProvider};
use crate::error::{Error, Result};
use crate::linker::{self, GoldLabelTensor, LinkScoreTensor, LinkerParams};
use crate::tensor::Matrix;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Projected entity width `d_e`.
    pub entity_width: usize,
    /// Number of relations `K`.
    pub relations: usize,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub linker: LinkerParams,
}

/// Gradient buffers with the same layout as the trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub encoder: Option<ToyEncoder>,
    pub linker: LinkerParams,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut v = self.encoder.as_ref().map(ToyEncoder::tensors).unwrap_or_default();
        v.extend(self.linker.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v = self.encoder.as_mut().map(ToyEncoder::tensors_mut).unwrap_or_default();
        v.extend(self.linker.tensors_mut());
        v
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, a) in self.tensors_mut() {
            *a *= factor;
        }
    }
}

impl Model {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.encoder.validate()?;
        let encoder = match config.encoder.kind {
            EncoderKind::Toy => Encoder::Toy(ToyEncoder::new(&config.encoder, rng)?),
            EncoderKind::PretrainedAdapter => Encoder::Pretrained(Arc::new(UnavailableProvider)),
        };
        let linker = LinkerParams::new(config.encoder.width, config.entity_width, config.relations, rng)?;
        Ok(Model { config, encoder, linker })
    }

    /// Replaces the hidden-state source of a pretrained-adapter model.
    pub fn attach_provider(&mut self, provider: Arc<dyn HiddenStateProvider>) -> Result<()> {
        if self.config.encoder.kind != EncoderKind::PretrainedAdapter {
            return Err(Error::Config("only pretrained-adapter models take a hidden-state provider".into()));
        }
        if provider.width() != self.config.encoder.width {
            return Err(Error::Shape(format!(
                "provider width {} does not match configured width {}",
                provider.width(),
                self.config.encoder.width
            )));
        }
        self.encoder = Encoder::Pretrained(provider);
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut v = match &self.encoder {
            Encoder::Toy(t) => t.tensors(),
            Encoder::Pretrained(_) => Vec::new(),
        };
        v.extend(self.linker.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v = match &mut self.encoder {
            Encoder::Toy(t) => t.tensors_mut(),
            Encoder::Pretrained(_) => Vec::new(),
        };
        v.extend(self.linker.tensors_mut());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            encoder: match &self.encoder {
                Encoder::Toy(t) => Some(t.zeros_like()),
                Encoder::Pretrained(_) => None,
            },
            linker: self.linker.zeros_like(),
        }
    }

    /// Link probabilities for every candidate pair and relation.
    pub fn score_spans(&self, ids: &[u32], spans: &[Span]) -> Result<LinkScoreTensor> {
        let h = self.encoder.encode(ids)?;
        let e = entity_repr(&h, spans)?;
        let (head, tail) = linker::project(&e, &self.linker)?;
        linker::score(&head, &tail, &self.linker.links)
    }

    /// Mean cell loss of one sentence over `candidates`.
    pub fn loss(&self, ids: &[u32], candidates: &CandidateSet, triples: &[GoldTriple]) -> Result<f64> {
        let scores = self.score_spans(ids, &candidates.spans)?;
        let (labels, _) = GoldLabelTensor::build(candidates, triples, self.config.relations);
        linker::loss(&scores, &labels)
    }

    /// Loss and its gradient with respect to every trainable parameter.
    pub fn loss_and_grad(
        &self,
        ids: &[u32],
        candidates: &CandidateSet,
        triples: &[GoldTriple],
    ) -> Result<(f64, Gradients)> {
        let mut grads = self.zero_gradients();
        let (h, trace) = match &self.encoder {
            Encoder::Toy(t) => {
                let (h, tr) = t.forward(ids)?;
                (h, Some(tr))
            }
            Encoder::Pretrained(_) => (self.encoder.encode(ids)?, None),
        };
        let e = entity_repr(&h, &candidates.spans)?;
        let (scores, ltrace) = linker::forward(e, &self.linker)?;
        let (labels, _) = GoldLabelTensor::build(candidates, triples, self.config.relations);
        let loss = linker::loss(&scores, &labels)?;
        let d_entities = linker::backward(&self.linker, &ltrace, &scores, &labels, &mut grads.linker);
        if let (Encoder::Toy(t), Some(trace), Some(g)) = (&self.encoder, trace, grads.encoder.as_mut()) {
            let d_h = entity_repr_backward(&d_entities, &candidates.spans, ids.len());
            t.backward(&trace, d_h, g);
        }
        Ok((loss, grads))
    }
}
