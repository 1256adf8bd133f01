//! Contextual token encoders and endpoint-averaged entity representations.
//!
//! The toy encoder sums a learned token embedding and a learned positional
//! embedding, then applies a stack of residual context-mixing layers
//! `H <- H + tanh(mix(H))`. Two mixers are available: a width-3 window over
//! neighbouring tokens, and single-head scaled dot-product self-attention.
//! Forward passes record what the hand-written backward pass needs.
//!
//! The pretrained slot delegates to a [`HiddenStateProvider`] returning
//! final-layer hidden states. It is frozen: no gradient flows into it.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::tensor::{ensure_finite, fan_in_uniform, normal_like, Matrix};

pub const PRETRAINED_WIDTH: usize = 768;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    Toy,
    PretrainedAdapter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixerKind {
    Window,
    Attention,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Token representation width `d`.
    pub width: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub layers: Vec<MixerKind>,
}

impl EncoderConfig {
    pub fn toy(vocab_size: usize) -> Self {
        EncoderConfig {
            kind: EncoderKind::Toy,
            width: 16,
            vocab_size,
            max_positions: crate::corpus::MAX_SEQUENCE_LEN,
            layers: vec![MixerKind::Window, MixerKind::Attention],
        }
    }

    pub fn pretrained() -> Self {
        EncoderConfig {
            kind: EncoderKind::PretrainedAdapter,
            width: PRETRAINED_WIDTH,
            vocab_size: 0,
            max_positions: crate::corpus::MAX_SEQUENCE_LEN,
            layers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("encoder width must be positive".into()));
        }
        if self.kind == EncoderKind::Toy && (self.vocab_size == 0 || self.max_positions == 0) {
            return Err(Error::Config("toy encoder needs a vocabulary and positional table".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MixerParams {
    Window { prev: Matrix, this: Matrix, next: Matrix, bias: Matrix },
    Attention { query: Matrix, key: Matrix, value: Matrix, out: Matrix, bias: Matrix },
}

impl MixerParams {
    fn init<R: Rng + ?Sized>(kind: MixerKind, d: usize, rng: &mut R) -> Self {
        match kind {
            MixerKind::Window => MixerParams::Window {
                prev: fan_in_uniform(rng, d, d, 3 * d),
                this: fan_in_uniform(rng, d, d, 3 * d),
                next: fan_in_uniform(rng, d, d, 3 * d),
                bias: Matrix::zeros((1, d)),
            },
            MixerKind::Attention => MixerParams::Attention {
                query: fan_in_uniform(rng, d, d, d),
                key: fan_in_uniform(rng, d, d, d),
                value: fan_in_uniform(rng, d, d, d),
                out: fan_in_uniform(rng, d, d, d),
                bias: Matrix::zeros((1, d)),
            },
        }
    }

    fn kind(&self) -> MixerKind {
        match self {
            MixerParams::Window { .. } => MixerKind::Window,
            MixerParams::Attention { .. } => MixerKind::Attention,
        }
    }

    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            MixerParams::Window { prev, this, next, bias } => {
                vec![("prev", prev), ("this", this), ("next", next), ("bias", bias)]
            }
            MixerParams::Attention { query, key, value, out, bias } => {
                vec![("query", query), ("key", key), ("value", value), ("out", out), ("bias", bias)]
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        match self {
            MixerParams::Window { prev, this, next, bias } => {
                vec![("prev", prev), ("this", this), ("next", next), ("bias", bias)]
            }
            MixerParams::Attention { query, key, value, out, bias } => {
                vec![("query", query), ("key", key), ("value", value), ("out", out), ("bias", bias)]
            }
        }
    }
}

/// Trainable parameters of the toy encoder. Also used to hold gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder {
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<MixerParams>,
}

enum LayerCache {
    Window { input: Matrix, act: Matrix },
    Attention { input: Matrix, q: Matrix, k: Matrix, v: Matrix, attn: Matrix, mixed: Matrix, act: Matrix },
}

/// Forward record for one sentence.
pub struct EncoderTrace {
    ids: Vec<u32>,
    caches: Vec<LayerCache>,
}

impl ToyEncoder {
    pub fn new<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let scale = 1.0 / (d as f64).sqrt();
        Ok(ToyEncoder {
            token_embedding: normal_like(rng, config.vocab_size, d, scale),
            position_embedding: normal_like(rng, config.max_positions, d, 0.1 * scale),
            layers: config.layers.iter().map(|&k| MixerParams::init(k, d, rng)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.token_embedding.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut v = vec![
            ("encoder.token_embedding".to_string(), &self.token_embedding),
            ("encoder.position_embedding".to_string(), &self.position_embedding),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let kind = match l.kind() {
                MixerKind::Window => "window",
                MixerKind::Attention => "attention",
            };
            for (name, t) in l.tensors() {
                v.push((format!("encoder.layer{i}.{kind}.{name}"), t));
            }
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v = vec![
            ("encoder.token_embedding".to_string(), &mut self.token_embedding),
            ("encoder.position_embedding".to_string(), &mut self.position_embedding),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let kind = match l.kind() {
                MixerKind::Window => "window",
                MixerKind::Attention => "attention",
            };
            for (name, t) in l.tensors_mut() {
                v.push((format!("encoder.layer{i}.{kind}.{name}"), t));
            }
        }
        v
    }

    /// Token embedding plus positional embedding, before any mixing.
    pub fn embed(&self, ids: &[u32]) -> Result<Matrix> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("cannot encode an empty token sequence"));
        }
        let vocab = self.token_embedding.nrows();
        if ids.len() > self.position_embedding.nrows() {
            return Err(Error::SequenceTooLong { len: ids.len(), max: self.position_embedding.nrows() });
        }
        let d = self.width();
        let mut x = Matrix::zeros((ids.len(), d));
        for (i, &id) in ids.iter().enumerate() {
            if id as usize >= vocab {
                return Err(Error::TokenOutOfRange { id, vocab_size: vocab });
            }
            let mut row = x.row_mut(i);
            row += &self.token_embedding.row(id as usize);
            row += &self.position_embedding.row(i);
        }
        Ok(x)
    }

    pub fn encode(&self, ids: &[u32]) -> Result<Matrix> {
        Ok(self.forward(ids)?.0)
    }

    pub fn forward(&self, ids: &[u32]) -> Result<(Matrix, EncoderTrace)> {
        let mut h = self.embed(ids)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = mix_forward(layer, h);
            h = next;
            caches.push(cache);
        }
        ensure_finite("encoder output", h.iter().copied())?;
        Ok((h, EncoderTrace { ids: ids.to_vec(), caches }))
    }

    /// Accumulates parameter gradients into `grads` given `d_out = dLoss/dH`.
    pub fn backward(&self, trace: &EncoderTrace, mut d_h: Matrix, grads: &mut ToyEncoder) {
        for ((layer, cache), g) in self.layers.iter().zip(&trace.caches).zip(grads.layers.iter_mut()).rev() {
            d_h = mix_backward(layer, cache, d_h, g);
        }
        for (i, &id) in trace.ids.iter().enumerate() {
            let row = d_h.row(i);
            let mut t = grads.token_embedding.row_mut(id as usize);
            t += &row;
            let mut p = grads.position_embedding.row_mut(i);
            p += &row;
        }
    }
}

fn shift_down(h: &Matrix) -> Matrix {
    // row i <- row i-1, row 0 <- 0
    let mut out = Matrix::zeros(h.raw_dim());
    if h.nrows() > 1 {
        out.slice_mut(s![1.., ..]).assign(&h.slice(s![..-1, ..]));
    }
    out
}

fn shift_up(h: &Matrix) -> Matrix {
    // row i <- row i+1, last row <- 0
    let mut out = Matrix::zeros(h.raw_dim());
    if h.nrows() > 1 {
        out.slice_mut(s![..-1, ..]).assign(&h.slice(s![1.., ..]));
    }
    out
}

fn softmax_rows(m: &mut Matrix) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn mix_forward(layer: &MixerParams, h: Matrix) -> (Matrix, LayerCache) {
    match layer {
        MixerParams::Window { prev, this, next, bias } => {
            let mut z = shift_down(&h).dot(prev) + h.dot(this) + shift_up(&h).dot(next);
            z += bias;
            let act = z.mapv(f64::tanh);
            let out = &h + &act;
            (out, LayerCache::Window { input: h, act })
        }
        MixerParams::Attention { query, key, value, out: w_out, bias } => {
            let scale = 1.0 / (h.ncols() as f64).sqrt();
            let q = h.dot(query);
            let k = h.dot(key);
            let v = h.dot(value);
            let mut attn = q.dot(&k.t()) * scale;
            softmax_rows(&mut attn);
            let mixed = attn.dot(&v);
            let mut z = mixed.dot(w_out);
            z += bias;
            let act = z.mapv(f64::tanh);
            let out = &h + &act;
            (out, LayerCache::Attention { input: h, q, k, v, attn, mixed, act })
        }
    }
}

fn mix_backward(layer: &MixerParams, cache: &LayerCache, d_out: Matrix, grads: &mut MixerParams) -> Matrix {
    match (layer, cache, grads) {
        (
            MixerParams::Window { prev, this, next, .. },
            LayerCache::Window { input, act },
            MixerParams::Window { prev: g_prev, this: g_this, next: g_next, bias: g_bias },
        ) => {
            let d_z = &d_out * &act.mapv(|a| 1.0 - a * a);
            *g_prev += &shift_down(input).t().dot(&d_z);
            *g_this += &input.t().dot(&d_z);
            *g_next += &shift_up(input).t().dot(&d_z);
            *g_bias += &d_z.sum_axis(Axis(0)).insert_axis(Axis(0));
            // z[i] reads h[i-1] through `prev` and h[i+1] through `next`.
            d_out + d_z.dot(&this.t()) + shift_up(&d_z.dot(&prev.t())) + shift_down(&d_z.dot(&next.t()))
        }
        (
            MixerParams::Attention { query, key, value, out: w_out, .. },
            LayerCache::Attention { input, q, k, v, attn, mixed, act },
            MixerParams::Attention { query: g_q, key: g_k, value: g_v, out: g_out, bias: g_bias },
        ) => {
            let scale = 1.0 / (input.ncols() as f64).sqrt();
            let d_z = &d_out * &act.mapv(|a| 1.0 - a * a);
            *g_out += &mixed.t().dot(&d_z);
            *g_bias += &d_z.sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_mixed = d_z.dot(&w_out.t());
            let d_attn = d_mixed.dot(&v.t());
            let d_v = attn.t().dot(&d_mixed);
            let row_dot = (&d_attn * attn).sum_axis(Axis(1)).insert_axis(Axis(1));
            let d_scores = attn * &(&d_attn - &row_dot);
            let d_q = d_scores.dot(k) * scale;
            let d_k = d_scores.t().dot(q) * scale;
            *g_q += &input.t().dot(&d_q);
            *g_k += &input.t().dot(&d_k);
            *g_v += &input.t().dot(&d_v);
            d_out + d_q.dot(&query.t()) + d_k.dot(&key.t()) + d_v.dot(&value.t())
        }
        _ => unreachable!("gradient buffers mirror the parameter layout"),
    }
}

/// Source of final-layer hidden states from an external pretrained encoder.
pub trait HiddenStateProvider: Send + Sync {
    fn width(&self) -> usize;
    fn hidden_states(&self, ids: &[u32]) -> Result<Matrix>;
}

/// Placeholder used when no pretrained backend is attached.
#[derive(Debug, Default)]
pub struct UnavailableProvider;

impl HiddenStateProvider for UnavailableProvider {
    fn width(&self) -> usize {
        PRETRAINED_WIDTH
    }

    fn hidden_states(&self, _ids: &[u32]) -> Result<Matrix> {
        Err(Error::Unavailable(
            "no pretrained transformer backend is attached; supply precomputed hidden states".into(),
        ))
    }
}

/// Hidden states precomputed offline, one JSON object per line:
/// `{"ids": [..], "hidden": [[..], ..]}` with one row per id.
#[derive(Debug)]
pub struct FeatureFileProvider {
    width: usize,
    table: HashMap<Vec<u32>, Matrix>,
}

#[derive(Deserialize)]
struct FeatureRecord {
    ids: Vec<u32>,
    hidden: Vec<Vec<f64>>,
}

impl FeatureFileProvider {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut table = HashMap::new();
        let mut width = None;
        for (n, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: FeatureRecord = serde_json::from_str(line)
                .map_err(|e| Error::MalformedRecord { line: n + 1, message: e.to_string() })?;
            let w = rec.hidden.first().map_or(0, Vec::len);
            if rec.hidden.len() != rec.ids.len() || rec.hidden.iter().any(|r| r.len() != w) || w == 0 {
                return Err(Error::MalformedRecord { line: n + 1, message: "hidden matrix shape does not match ids".into() });
            }
            if *width.get_or_insert(w) != w {
                return Err(Error::MalformedRecord { line: n + 1, message: format!("width {w} differs from earlier rows") });
            }
            let flat: Vec<f64> = rec.hidden.into_iter().flatten().collect();
            let m = Matrix::from_shape_vec((rec.ids.len(), w), flat).map_err(|e| Error::Shape(e.to_string()))?;
            table.insert(rec.ids, m);
        }
        Ok(FeatureFileProvider { width: width.unwrap_or(PRETRAINED_WIDTH), table })
    }
}

impl HiddenStateProvider for FeatureFileProvider {
    fn width(&self) -> usize {
        self.width
    }

    fn hidden_states(&self, ids: &[u32]) -> Result<Matrix> {
        self.table
            .get(ids)
            .cloned()
            .ok_or_else(|| Error::Unavailable(format!("no precomputed hidden states for a {}-token input", ids.len())))
    }
}

/// Either a trainable toy encoder or a frozen pretrained adapter.
#[derive(Clone)]
pub enum Encoder {
    Toy(ToyEncoder),
    Pretrained(Arc<dyn HiddenStateProvider>),
}

impl fmt::Debug for Encoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoder::Toy(t) => f.debug_tuple("Toy").field(&t.width()).finish(),
            Encoder::Pretrained(p) => f.debug_tuple("Pretrained").field(&p.width()).finish(),
        }
    }
}

impl Encoder {
    pub fn width(&self) -> usize {
        match self {
            Encoder::Toy(t) => t.width(),
            Encoder::Pretrained(p) => p.width(),
        }
    }

    pub fn encode(&self, ids: &[u32]) -> Result<Matrix> {
        match self {
            Encoder::Toy(t) => t.encode(ids),
            Encoder::Pretrained(p) => {
                let h = p.hidden_states(ids)?;
                if h.nrows() != ids.len() {
                    return Err(Error::Shape(format!("adapter returned {} rows for {} tokens", h.nrows(), ids.len())));
                }
                ensure_finite("adapter hidden states", h.iter().copied())?;
                Ok(h)
            }
        }
    }
}

/// Entity vectors: row `i` is the mean of the token vectors at the start and
/// end of `spans[i]`. Interior tokens do not contribute.
pub fn entity_repr(tokens: &Matrix, spans: &[Span]) -> Result<Matrix> {
    let len = tokens.nrows();
    let mut out = Matrix::zeros((spans.len(), tokens.ncols()));
    for (i, sp) in spans.iter().enumerate() {
        sp.check_within(len)?;
        let mut row = out.row_mut(i);
        row.assign(&tokens.row(sp.start));
        row += &tokens.row(sp.end);
        row *= 0.5;
    }
    Ok(out)
}

/// Adjoint of [`entity_repr`]: scatters entity gradients back onto tokens.
pub fn entity_repr_backward(d_entities: &Matrix, spans: &[Span], seq_len: usize) -> Matrix {
    let mut d = Matrix::zeros((seq_len, d_entities.ncols()));
    for (i, sp) in spans.iter().enumerate() {
        let half = &d_entities.row(i) * 0.5;
        let mut a = d.row_mut(sp.start);
        a += &half;
        let mut b = d.row_mut(sp.end);
        b += &half;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy(d: usize) -> ToyEncoder {
        let cfg = EncoderConfig { width: d, vocab_size: 10, max_positions: 12, ..EncoderConfig::toy(10) };
        ToyEncoder::new(&cfg, &mut seeded(3)).unwrap()
    }

    #[test]
    fn output_shape_and_determinism() {
        let enc = toy(6);
        let a = enc.encode(&[1, 2, 3, 4]).unwrap();
        assert_eq!(a.dim(), (4, 6));
        assert_eq!(a, enc.encode(&[1, 2, 3, 4]).unwrap());
    }

    #[test]
    fn zero_mixing_weights_leave_embeddings() {
        let mut enc = toy(5);
        for l in &mut enc.layers {
            for (_, t) in l.tensors_mut() {
                t.fill(0.0);
            }
        }
        let ids = [3, 1, 4, 1, 5];
        let out = enc.encode(&ids).unwrap();
        for (i, &id) in ids.iter().enumerate() {
            for c in 0..5 {
                let expect = enc.token_embedding[[id as usize, c]] + enc.position_embedding[[i, c]];
                assert_eq!(out[[i, c]], expect);
            }
        }
    }

    #[test]
    fn out_of_range_inputs_are_errors() {
        let enc = toy(4);
        assert!(matches!(enc.encode(&[10]), Err(Error::TokenOutOfRange { .. })));
        assert!(matches!(enc.encode(&[1; 13]), Err(Error::SequenceTooLong { .. })));
        assert!(enc.encode(&[]).is_err());
    }

    #[test]
    fn unavailable_adapter_is_explicit() {
        let enc = Encoder::Pretrained(Arc::new(UnavailableProvider));
        assert!(matches!(enc.encode(&[1, 2]), Err(Error::Unavailable(_))));
        assert_eq!(enc.width(), 768);
    }

    #[test]
    fn feature_file_adapter_serves_known_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.jsonl");
        std::fs::write(&p, "{\"ids\": [4, 5], \"hidden\": [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]}\n").unwrap();
        let enc = Encoder::Pretrained(Arc::new(FeatureFileProvider::open(&p).unwrap()));
        assert_eq!(enc.width(), 3);
        assert_eq!(enc.encode(&[4, 5]).unwrap()[[1, 2]], 6.0);
        assert!(enc.encode(&[4]).is_err());
    }

    #[test]
    fn entity_repr_examples() {
        let h = Matrix::from_shape_vec((3, 2), vec![2.0, 0.0, 9.0, 9.0, 0.0, 2.0]).unwrap();
        let e = entity_repr(&h, &[Span::single(1), Span { start: 0, end: 2 }]).unwrap();
        assert_eq!(e.row(0).to_vec(), vec![9.0, 9.0]);
        assert_eq!(e.row(1).to_vec(), vec![1.0, 1.0]);
        assert!(entity_repr(&h, &[Span { start: 1, end: 3 }]).is_err());
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeded(seed);
        Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn entity_repr_matches_scalar_loop() {
        let h = random_matrix(7, 4, 11);
        let spans = crate::candidates::enumerate_spans(7, 3).unwrap();
        let e = entity_repr(&h, &spans).unwrap();
        for (i, sp) in spans.iter().enumerate() {
            for c in 0..4 {
                let expect = (h[[sp.start, c]] + h[[sp.end, c]]) / 2.0;
                assert_eq!(e[[i, c]], expect);
            }
        }
    }

    proptest! {
        #[test]
        fn entity_repr_is_linear_and_ignores_interior(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
            let a = random_matrix(6, 3, seed);
            let b = random_matrix(6, 3, seed + 1);
            let spans = crate::candidates::enumerate_spans(6, 4).unwrap();
            let lhs = entity_repr(&(&a * alpha + &b * beta), &spans).unwrap();
            let rhs = entity_repr(&a, &spans).unwrap() * alpha + entity_repr(&b, &spans).unwrap() * beta;
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let sp = Span { start: 1, end: 4 };
            let mut c = a.clone();
            c.row_mut(2).fill(100.0);
            c.row_mut(3).fill(-7.0);
            prop_assert_eq!(entity_repr(&a, &[sp]).unwrap(), entity_repr(&c, &[sp]).unwrap());
        }
    }
}
