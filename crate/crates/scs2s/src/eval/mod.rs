//! Model-quality measurements: corpus BLEU with a per-source-length
//! breakdown, TF-IDF cosine similarity, and semantic-vector cosine /
//! Euclidean distance over encoder states.

mod bleu;
mod semantic;
mod tfidf;

pub use bleu::{bleu, bleu_by_length};
pub use semantic::{cosine, euclidean, semantic_similarity};
pub use tfidf::{tfidf_similarity, IdfTable, TfIdfVector};

use crate::corpus::{SequencePair, Token};
use crate::error::{Error, Result};
use crate::model::{DecodeMode, Seq2Seq};

/// Everything measured over one evaluation corpus.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub pair_count: usize,
    pub corpus_bleu: f64,
    /// (source length, pairs, BLEU); flagged entries are lengths whose
    /// subset zeroed out a pooled precision.
    pub bleu_per_length: Vec<(usize, usize, f64)>,
    pub mean_tfidf_cosine: f64,
    pub mean_semantic_cosine: f64,
    pub mean_euclidean: f64,
    /// Pairs whose semantic vector was zero (cosine flagged as 0).
    pub zero_vector_flags: usize,
}

/// Decodes every test source with the model and scores predictions against
/// the gold targets. The IDF table is built over the gold targets (one
/// document each) so predictions and references share one weighting space.
pub fn evaluate(
    model: &Seq2Seq,
    pairs: &[SequencePair],
    max_len: usize,
    mode: DecodeMode,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Input("evaluation needs at least one pair".into()));
    }
    let predictions: Vec<Vec<Token>> = pairs
        .iter()
        .map(|p| model.predict(&p.source, max_len, mode))
        .collect::<Result<_>>()?;
    let targets: Vec<Vec<Token>> = pairs.iter().map(|p| p.target.clone()).collect();
    let source_lengths: Vec<usize> = pairs.iter().map(|p| p.source.len()).collect();

    let corpus_bleu = bleu(&predictions, &targets, 4)?;
    let bleu_per_length = bleu_by_length(&source_lengths, &predictions, &targets, 4)?;

    let idf = IdfTable::build(&targets);
    let mut tfidf_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut euc_sum = 0.0;
    let mut zero_flags = 0usize;
    for (pred, pair) in predictions.iter().zip(pairs) {
        tfidf_sum += tfidf_similarity(pred, &pair.target, &idf);
        if pred.is_empty() {
            // An empty prediction has no semantic vector; score it as
            // maximally dissimilar and flag it.
            zero_flags += 1;
            let vt = model.encode_semantic(&pair.target)?;
            euc_sum += vt.iter().map(|x| x * x).sum::<f64>().sqrt();
            continue;
        }
        let (cos, euc) = semantic_similarity(model, pred, &pair.target)?;
        if cos == 0.0 {
            zero_flags += 1;
        }
        cos_sum += cos;
        euc_sum += euc;
    }

    let n = pairs.len() as f64;
    Ok(EvalReport {
        pair_count: pairs.len(),
        corpus_bleu,
        bleu_per_length,
        mean_tfidf_cosine: tfidf_sum / n,
        mean_semantic_cosine: cos_sum / n,
        mean_euclidean: euc_sum / n,
        zero_vector_flags: zero_flags,
    })
}

impl EvalReport {
    /// CSV body for the BLEU file: per-length rows then the `all` row.
    pub fn bleu_csv(&self) -> String {
        let mut out = String::from("source_length,pairs,bleu\n");
        for (len, count, score) in &self.bleu_per_length {
            out.push_str(&format!("{len},{count},{score}\n"));
        }
        out.push_str(&format!("all,{},{}\n", self.pair_count, self.corpus_bleu));
        out
    }

    pub fn tfidf_csv(&self) -> String {
        format!("pairs,mean_tfidf_cosine\n{},{}\n", self.pair_count, self.mean_tfidf_cosine)
    }

    pub fn semantic_csv(&self) -> String {
        format!(
            "pairs,mean_semantic_cosine,mean_euclidean,zero_vector_flags\n{},{},{},{}\n",
            self.pair_count, self.mean_semantic_cosine, self.mean_euclidean, self.zero_vector_flags
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TraceLabel;
    use crate::model::{CellKind, ModelConfig};
    use crate::numeric::Rng;
    use std::path::PathBuf;

    #[test]
    fn evaluate_produces_consistent_report() {
        let config = ModelConfig {
            cell: CellKind::Gru,
            layers: 1,
            hidden: 8,
            vocab_size: 16,
            attention: true,
            dropout_keep: 0.5,
        };
        let model = Seq2Seq::new(config, &mut Rng::new(9)).unwrap();
        let mut rng = Rng::new(10);
        let pairs: Vec<SequencePair> = (0..12)
            .map(|i| {
                let source: Vec<u32> =
                    (0..4 + (i % 3)).map(|_| 4 + rng.below(10) as u32).collect();
                let target: Vec<u32> =
                    (0..3 + (i % 4)).map(|_| 4 + rng.below(10) as u32).collect();
                SequencePair {
                    window_len: source.len() + target.len(),
                    source,
                    target,
                    label: TraceLabel::Normal,
                    origin: PathBuf::from(format!("p{i}")),
                }
            })
            .collect();
        let report = evaluate(&model, &pairs, 8, DecodeMode::Greedy).unwrap();
        assert_eq!(report.pair_count, 12);
        assert!((0.0..=100.0).contains(&report.corpus_bleu));
        assert!((-1.0..=1.0).contains(&report.mean_semantic_cosine));
        assert!(report.mean_euclidean >= 0.0);
        let grouped: usize = report.bleu_per_length.iter().map(|(_, n, _)| n).sum();
        assert_eq!(grouped, 12);
        let csv = report.bleu_csv();
        assert!(csv.lines().last().unwrap().starts_with("all,12,"));
    }
}
