//! Head/tail projections, relation-specific bilinear link scoring and the
//! binary cross-entropy objective over every `(head, relation, tail)` cell.

use ndarray::{Array3, Axis};
use rand::Rng;

use crate::candidates::CandidateSet;
use crate::corpus::GoldTriple;
use crate::error::{Error, Result};
use crate::tensor::{bce_with_logit, ensure_finite, fan_in_uniform, sigmoid, Matrix};

/// Projection and link parameters. Also used to hold gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkerParams {
    /// `d x d_e`
    pub head_weight: Matrix,
    /// `1 x d_e`
    pub head_bias: Matrix,
    pub tail_weight: Matrix,
    pub tail_bias: Matrix,
    /// One `d_e x d_e` link matrix per relation.
    pub links: Vec<Matrix>,
}

impl LinkerParams {
    pub fn new<R: Rng + ?Sized>(width: usize, entity_width: usize, relations: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || entity_width == 0 || relations == 0 {
            return Err(Error::Config(format!(
                "linker dimensions must be positive (d={width}, d_e={entity_width}, K={relations})"
            )));
        }
        Ok(LinkerParams {
            head_weight: fan_in_uniform(rng, width, entity_width, width),
            head_bias: Matrix::zeros((1, entity_width)),
            tail_weight: fan_in_uniform(rng, width, entity_width, width),
            tail_bias: Matrix::zeros((1, entity_width)),
            links: (0..relations).map(|_| fan_in_uniform(rng, entity_width, entity_width, entity_width)).collect(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.head_weight.nrows()
    }

    pub fn entity_width(&self) -> usize {
        self.head_weight.ncols()
    }

    pub fn relations(&self) -> usize {
        self.links.len()
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
            ("linker.head_weight".to_string(), &self.head_weight),
            ("linker.head_bias".to_string(), &self.head_bias),
            ("linker.tail_weight".to_string(), &self.tail_weight),
            ("linker.tail_bias".to_string(), &self.tail_bias),
        ];
        v.extend(self.links.iter().enumerate().map(|(k, u)| (format!("linker.link{k}"), u)));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v = vec![
            ("linker.head_weight".to_string(), &mut self.head_weight),
            ("linker.head_bias".to_string(), &mut self.head_bias),
            ("linker.tail_weight".to_string(), &mut self.tail_weight),
            ("linker.tail_bias".to_string(), &mut self.tail_bias),
        ];
        v.extend(self.links.iter_mut().enumerate().map(|(k, u)| (format!("linker.link{k}"), u)));
        v
    }
}

/// Affine maps into head space and tail space, applied row-wise.
pub fn project(entities: &Matrix, params: &LinkerParams) -> Result<(Matrix, Matrix)> {
    if entities.ncols() != params.input_width() {
        return Err(Error::Shape(format!(
            "entity width {} does not match projection input width {}",
            entities.ncols(),
            params.input_width()
        )));
    }
    let head = entities.dot(&params.head_weight) + &params.head_bias;
    let tail = entities.dot(&params.tail_weight) + &params.tail_bias;
    Ok((head, tail))
}

/// Link probabilities indexed `[head candidate, relation, tail candidate]`.
///
/// `logits` is kept when the tensor came from scoring so the loss can be
/// evaluated in its numerically stable form.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkScoreTensor {
    pub probs: Array3<f64>,
    pub logits: Option<Array3<f64>>,
}

impl LinkScoreTensor {
    pub fn from_probs(probs: Array3<f64>) -> Self {
        LinkScoreTensor { probs, logits: None }
    }

    pub fn from_logits(logits: Array3<f64>) -> Self {
        LinkScoreTensor { probs: logits.mapv(sigmoid), logits: Some(logits) }
    }

    pub fn candidates(&self) -> usize {
        self.probs.dim().0
    }

    pub fn relations(&self) -> usize {
        self.probs.dim().1
    }
}

/// `logits[i][k][j] = head_i · U_k · tail_j`.
pub fn link_logits(head: &Matrix, tail: &Matrix, links: &[Matrix]) -> Result<Array3<f64>> {
    let de = head.ncols();
    if tail.ncols() != de || links.iter().any(|u| u.dim() != (de, de)) {
        return Err(Error::Shape(format!(
            "head width {}, tail width {}, link shapes {:?}",
            de,
            tail.ncols(),
            links.iter().map(Matrix::dim).collect::<Vec<_>>()
        )));
    }
    if links.is_empty() {
        return Err(Error::Shape("no link matrices".into()));
    }
    let n = head.nrows();
    let mut out = Array3::zeros((n, links.len(), tail.nrows()));
    for (k, u) in links.iter().enumerate() {
        let slice = head.dot(u).dot(&tail.t());
        out.index_axis_mut(Axis(1), k).assign(&slice);
    }
    ensure_finite("link logits", out.iter().copied())?;
    Ok(out)
}

pub fn score(head: &Matrix, tail: &Matrix, links: &[Matrix]) -> Result<LinkScoreTensor> {
    Ok(LinkScoreTensor::from_logits(link_logits(head, tail, links)?))
}

/// Gold indicator tensor aligned with a candidate set.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldLabelTensor {
    pub labels: Array3<f64>,
}

impl GoldLabelTensor {
    /// Marks `(i, k, j)` for every gold triple whose head and tail are both
    /// candidates; returns how many gold triples were unreachable.
    pub fn build(candidates: &CandidateSet, triples: &[GoldTriple], relations: usize) -> (Self, usize) {
        let n = candidates.len();
        let mut labels = Array3::zeros((n, relations, n));
        let index: std::collections::HashMap<_, _> =
            candidates.spans.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut missing = 0;
        for t in triples {
            match (index.get(&t.head), index.get(&t.tail)) {
                (Some(&i), Some(&j)) if t.relation < relations => labels[[i, t.relation, j]] = 1.0,
                _ => missing += 1,
            }
        }
        (GoldLabelTensor { labels }, missing)
    }
}

/// Mean binary cross-entropy over all `|E| * K * |E|` cells.
pub fn loss(scores: &LinkScoreTensor, labels: &GoldLabelTensor) -> Result<f64> {
    if scores.probs.dim() != labels.labels.dim() {
        return Err(Error::Shape(format!("scores {:?} vs labels {:?}", scores.probs.dim(), labels.labels.dim())));
    }
    let cells = scores.probs.len();
    if cells == 0 {
        return Ok(0.0);
    }
    let total: f64 = match &scores.logits {
        Some(logits) => logits.iter().zip(labels.labels.iter()).map(|(&x, &y)| bce_with_logit(x, y)).sum(),
        None => scores
            .probs
            .iter()
            .zip(labels.labels.iter())
            .map(|(&p, &y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
            .sum(),
    };
    Ok(total / cells as f64)
}

/// Cached activations of one scoring pass, for the backward pass.
pub struct LinkerTrace {
    pub entities: Matrix,
    pub head: Matrix,
    pub tail: Matrix,
}

pub fn forward(entities: Matrix, params: &LinkerParams) -> Result<(LinkScoreTensor, LinkerTrace)> {
    let (head, tail) = project(&entities, params)?;
    let scores = score(&head, &tail, &params.links)?;
    Ok((scores, LinkerTrace { entities, head, tail }))
}

/// Accumulates `dLoss/dparams` into `grads` for the mean BCE loss and
/// returns `dLoss/dentities`.
pub fn backward(
    params: &LinkerParams,
    trace: &LinkerTrace,
    scores: &LinkScoreTensor,
    labels: &GoldLabelTensor,
    grads: &mut LinkerParams,
) -> Matrix {
    let cells = scores.probs.len().max(1) as f64;
    let d_logits = (&scores.probs - &labels.labels) / cells;
    let mut d_head = Matrix::zeros(trace.head.raw_dim());
    let mut d_tail = Matrix::zeros(trace.tail.raw_dim());
    for (k, u) in params.links.iter().enumerate() {
        let g = d_logits.index_axis(Axis(1), k);
        let g_tail = g.dot(&trace.tail);
        grads.links[k] += &trace.head.t().dot(&g_tail);
        d_head += &g_tail.dot(&u.t());
        d_tail += &g.t().dot(&trace.head).dot(u);
    }
    grads.head_weight += &trace.entities.t().dot(&d_head);
    grads.head_bias += &d_head.sum_axis(Axis(0)).insert_axis(Axis(0));
    grads.tail_weight += &trace.entities.t().dot(&d_tail);
    grads.tail_bias += &d_tail.sum_axis(Axis(0)).insert_axis(Axis(0));
    d_head.dot(&params.head_weight.t()) + d_tail.dot(&params.tail_weight.t())
}
