//! Sequence-to-sequence modeling of system-call traces for intrusion
//! prediction and anomaly-detection enhancement.
//!
//! The crate trains a GRU encoder-decoder (optionally with additive
//! attention) to predict the system calls a process will invoke next,
//! entirely from scratch: dense matrix math, hand-written backpropagation
//! through time, SGD with gradient clipping, BLEU / TF-IDF / semantic
//! evaluation, and ROC-based detection experiments over the predicted
//! sequences. A bundled CLI (`scs2s`) exposes the full pipeline.
//!
//! See the `book/` guide for a narrative walk-through of each stage.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod detect;
pub mod error;
pub mod eval;
pub mod model;
pub mod numeric;
pub mod train;

pub use error::{Error, Result};

/// Tool version stamped into every artifact header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
