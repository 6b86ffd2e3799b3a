use std::collections::BTreeMap;

use crate::corpus::Token;

/// Shared IDF table: idf(t) = ln((1+N)/(1+df(t))) + 1, built once over an
/// evaluation corpus where each target sequence is one document.
#[derive(Debug, Clone)]
pub struct IdfTable {
    n_docs: usize,
    idf: BTreeMap<Token, f64>,
}

impl IdfTable {
    pub fn build(documents: &[Vec<Token>]) -> IdfTable {
        let mut df: BTreeMap<Token, usize> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<Token> = doc.clone();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = documents.len();
        let idf = df
            .into_iter()
            .map(|(t, d)| (t, ((1 + n) as f64 / (1 + d) as f64).ln() + 1.0))
            .collect();
        IdfTable { n_docs: n, idf }
    }

    /// Weight of a token: smoothed IDF even for unseen tokens.
    pub fn weight(&self, token: Token) -> f64 {
        self.idf
            .get(&token)
            .copied()
            .unwrap_or_else(|| ((1 + self.n_docs) as f64).ln() + 1.0)
    }

    #[cfg(test)]
    pub(crate) fn scaled(&self, factor: f64) -> IdfTable {
        IdfTable {
            n_docs: self.n_docs,
            idf: self.idf.iter().map(|(&t, &w)| (t, w * factor)).collect(),
        }
    }
}

/// Sparse TF-IDF vector over tokens: tf is the raw in-sequence count.
#[derive(Debug, Clone, Default)]
pub struct TfIdfVector {
    pub weights: BTreeMap<Token, f64>,
}

impl TfIdfVector {
    pub fn build(seq: &[Token], idf: &IdfTable) -> TfIdfVector {
        let mut tf: BTreeMap<Token, f64> = BTreeMap::new();
        for &t in seq {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
        let weights = tf.into_iter().map(|(t, c)| (t, c * idf.weight(t))).collect();
        TfIdfVector { weights }
    }

    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TfIdfVector) -> f64 {
        // Walk the smaller map.
        let (small, large) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .weights
            .iter()
            .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
            .sum()
    }
}

/// Cosine similarity of the TF-IDF vectors of two sequences; 0 when either
/// vector is zero. Weights are non-negative, so the result lies in [0, 1].
pub fn tfidf_similarity(a: &[Token], b: &[Token], idf: &IdfTable) -> f64 {
    let va = TfIdfVector::build(a, idf);
    let vb = TfIdfVector::build(b, idf);
    let na = va.norm();
    let nb = vb.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    va.dot(&vb) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    fn table() -> IdfTable {
        IdfTable::build(&[vec![4, 5, 6], vec![5, 6, 7], vec![6, 7, 8], vec![4, 4, 9]])
    }

    #[test]
    fn identical_sequences_score_one() {
        let idf = table();
        let s = vec![4, 5, 5, 6];
        assert!((tfidf_similarity(&s, &s, &idf) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_token_sets_score_zero() {
        let idf = table();
        assert_eq!(tfidf_similarity(&[4, 5], &[7, 8], &idf), 0.0);
    }

    #[test]
    fn matches_direct_formula_oracle() {
        let idf = table();
        let mut rng = Rng::new(201);
        for _ in 0..50 {
            let a: Vec<u32> = (0..1 + rng.below(10)).map(|_| 4 + rng.below(6) as u32).collect();
            let b: Vec<u32> = (0..1 + rng.below(10)).map(|_| 4 + rng.below(6) as u32).collect();
            let got = tfidf_similarity(&a, &b, &idf);

            // Direct dot/norm oracle over a dense token range.
            let dense = |s: &[u32]| -> Vec<f64> {
                (0u32..16)
                    .map(|t| {
                        let count = s.iter().filter(|&&x| x == t).count() as f64;
                        count * idf.weight(t)
                    })
                    .collect()
            };
            let da = dense(&a);
            let db = dense(&b);
            let dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
            let na: f64 = da.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = db.iter().map(|x| x * x).sum::<f64>().sqrt();
            let want = if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) };
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!((0.0..=1.0 + 1e-12).contains(&got));
        }
    }

    #[test]
    fn cosine_invariant_to_uniform_idf_scaling() {
        let idf = table();
        let scaled = idf.scaled(7.5);
        let a = vec![4, 5, 6, 6];
        let b = vec![5, 6, 7];
        let x = tfidf_similarity(&a, &b, &idf);
        let y = tfidf_similarity(&a, &b, &scaled);
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn idf_downweights_ubiquitous_tokens() {
        let idf = table();
        // Token 6 appears in 3 of 4 documents, token 9 in 1.
        assert!(idf.weight(6) < idf.weight(9));
    }
}
