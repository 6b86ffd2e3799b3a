use std::collections::HashMap;

use crate::corpus::Token;

/// Feature table over 1..=n_max grams of the training split: each n-gram
/// seen in training gets an index and a smoothed IDF weight. N-grams never
/// seen in training produce no feature.
#[derive(Debug, Clone)]
pub struct NgramTable {
    pub n_max: usize,
    index: HashMap<Vec<Token>, usize>,
    idf: Vec<f64>,
}

impl NgramTable {
    pub fn build(sequences: &[Vec<Token>], n_max: usize) -> NgramTable {
        assert!(n_max >= 1);
        let mut df: HashMap<Vec<Token>, usize> = HashMap::new();
        for seq in sequences {
            let mut seen: Vec<Vec<Token>> = Vec::new();
            for n in 1..=n_max {
                if seq.len() < n {
                    continue;
                }
                for gram in seq.windows(n) {
                    if !seen.iter().any(|g| g == gram) {
                        seen.push(gram.to_vec());
                    }
                }
            }
            for gram in seen {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        // Deterministic indices: sort grams lexicographically.
        let mut grams: Vec<(Vec<Token>, usize)> = df.into_iter().collect();
        grams.sort();
        let n_docs = sequences.len();
        let mut index = HashMap::with_capacity(grams.len());
        let mut idf = Vec::with_capacity(grams.len());
        for (i, (gram, d)) in grams.into_iter().enumerate() {
            index.insert(gram, i);
            idf.push(((1 + n_docs) as f64 / (1 + d) as f64).ln() + 1.0);
        }
        NgramTable { n_max, index, idf }
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Counts all 1..=n_max grams, weights them by TF-IDF, and returns the
    /// L2-normalized sparse vector sorted by feature index. The norm is 1
    /// unless no known n-gram appears (then the vector is empty).
    pub fn featurize(&self, seq: &[Token]) -> Vec<(usize, f64)> {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for n in 1..=self.n_max {
            if seq.len() < n {
                continue;
            }
            for gram in seq.windows(n) {
                if let Some(&idx) = self.index.get(gram) {
                    *counts.entry(idx).or_insert(0.0) += 1.0;
                }
            }
        }
        let mut features: Vec<(usize, f64)> =
            counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        features.sort_by_key(|(i, _)| *i);
        let norm = features.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in features.iter_mut() {
                *w /= norm;
            }
        }
        features
    }

    /// Raw (unweighted) counts, exposed for tests.
    pub fn raw_counts(&self, seq: &[Token]) -> Vec<(Vec<Token>, usize)> {
        let mut out: Vec<(Vec<Token>, usize)> = Vec::new();
        for n in 1..=self.n_max {
            if seq.len() < n {
                continue;
            }
            for gram in seq.windows(n) {
                match out.iter_mut().find(|(g, _)| g == gram) {
                    Some((_, c)) => *c += 1,
                    None => out.push((gram.to_vec(), 1)),
                }
            }
        }
        out
    }
}
