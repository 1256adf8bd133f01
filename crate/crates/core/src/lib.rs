//! One-step relational triple extraction.
//!
//! Every contiguous token span up to a maximum length is treated as a
//! candidate entity. Candidates are projected into a head space and a tail
//! space, and a relation-specific bilinear link matrix scores every
//! `(head, relation, tail)` cell of the resulting bipartite graph. Cells whose
//! probability exceeds a threshold are read off directly as triples, so there
//! is no boundary-tagging stage whose errors could accumulate.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus`]: dataset loading, tokenization, span alignment, overlap
//!   pattern classification, corpus statistics and a synthetic corpus generator.
//! * [`candidates`]: span enumeration and negative sampling.
//! * [`encoder`]: contextual token representations (a small trainable encoder
//!   and a slot for pretrained hidden states) and endpoint-averaged entity vectors.
//! * [`linker`]: head/tail projections, relation-specific scoring and the
//!   binary cross-entropy objective with analytic gradients.
//! * [`model`]: the composed model, its parameter store and checkpoints.
//! * [`decoder`]: threshold decoding and the prediction file format.
//! * [`evaluation`]: micro P/R/F1, split and sub-task reports, error taxonomy,
//!   length distributions and the inference timing harness.
//! * [`train`]: run configuration, Adam and the training loop.
//! * [`commands`]: the operations behind the `triplink` binary.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod candidates;
pub mod commands;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod linker;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use candidates::{enumerate_spans, CandidateSet};
pub use corpus::{GoldTriple, RelationSchema, Sentence, Span};
pub use decoder::{decode, PredictedTriple};
pub use error::{Error, Result};
pub use model::Model;
