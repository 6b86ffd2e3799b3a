use crate::corpus::Token;
use crate::error::Result;
use crate::model::Seq2Seq;

/// Cosine of two dense vectors; 0 (flagged by the caller) when either is
/// the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine over unequal dimensions");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "euclidean over unequal dimensions");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Encodes both sequences with the model's encoder and compares the final
/// hidden states: (cosine, euclidean distance).
pub fn semantic_similarity(model: &Seq2Seq, a: &[Token], b: &[Token]) -> Result<(f64, f64)> {
    let va = model.encode_semantic(a)?;
    let vb = model.encode_semantic(b)?;
    Ok((cosine(&va, &vb), euclidean(&va, &vb)))
}
