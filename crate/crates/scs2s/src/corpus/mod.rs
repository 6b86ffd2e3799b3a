//! Trace ingestion, vocabulary construction, window segmentation into
//! (source, target) pairs, bucketed batching, and synthetic corpora.

mod batch;
mod pairs;
mod synth;
mod trace;
mod vocab;

pub use batch::{default_buckets, make_batches, Batch, BatchReport, Bucket};
pub use pairs::{
    make_pairs, read_pairs_tsv, write_pairs_tsv, PairConfig, PairReport, SequencePair,
};
pub use synth::{demo_spec, generate_synthetic, Automaton, SynthSpec, DEMO_SPEC};
pub use trace::{ingest_adfa, parse_trace_text, AdfaDataset, IngestReport, Trace, TraceLabel};
pub use vocab::{Token, Vocabulary, BOS, EOS, PAD, SPECIALS, UNK};
