use std::collections::HashMap;

use crate::corpus::Token;
use crate::error::{Error, Result};

/// Corpus-level BLEU in [0, 100]: geometric mean of modified n-gram
/// precisions for n = 1..=max_n (clipped counts pooled over the corpus)
/// times the brevity penalty exp(min(0, 1 - ref_len/cand_len)). Standard
/// BLEU, no smoothing: any zero pooled precision zeroes the score. An
/// order where no candidate holds any n-gram at all is undefined rather
/// than zero and drops out of the mean, so an identity corpus scores 100
/// even when every sequence is shorter than max_n.
pub fn bleu(candidates: &[Vec<Token>], references: &[Vec<Token>], max_n: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Input("bleu needs at least one candidate".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Input(format!(
            "bleu got {} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    assert!(max_n >= 1);

    let mut cand_total = 0usize;
    let mut ref_total = 0usize;
    let mut matched = vec![0usize; max_n];
    let mut possible = vec![0usize; max_n];

    for (cand, reference) in candidates.iter().zip(references) {
        cand_total += cand.len();
        ref_total += reference.len();
        for n in 1..=max_n {
            let cand_counts = ngram_counts(cand, n);
            if cand_counts.is_empty() {
                continue;
            }
            let ref_counts = ngram_counts(reference, n);
            for (gram, &count) in &cand_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matched[n - 1] += count.min(clip);
                possible[n - 1] += count;
            }
        }
    }

    let mut log_precision_sum = 0.0;
    let mut defined_orders = 0usize;
    for n in 0..max_n {
        if possible[n] == 0 {
            continue;
        }
        if matched[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matched[n] as f64 / possible[n] as f64).ln();
        defined_orders += 1;
    }
    if defined_orders == 0 {
        return Ok(0.0);
    }
    let geo_mean = (log_precision_sum / defined_orders as f64).exp();

    let bp = if cand_total == 0 {
        return Ok(0.0);
    } else if cand_total >= ref_total {
        1.0
    } else {
        (1.0 - ref_total as f64 / cand_total as f64).exp()
    };
    Ok(100.0 * bp * geo_mean)
}

/// BLEU per source-length group: pairs are grouped by the length of their
/// source sequence and scored as separate corpora. Returns rows sorted by
/// length as (source_length, pair_count, bleu).
pub fn bleu_by_length(
    source_lengths: &[usize],
    candidates: &[Vec<Token>],
    references: &[Vec<Token>],
    max_n: usize,
) -> Result<Vec<(usize, usize, f64)>> {
    if source_lengths.len() != candidates.len() || candidates.len() != references.len() {
        return Err(Error::Input("bleu_by_length inputs must align".into()));
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &len) in source_lengths.iter().enumerate() {
        groups.entry(len).or_default().push(i);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (len, idx) in groups {
        let cands: Vec<Vec<Token>> = idx.iter().map(|&i| candidates[i].clone()).collect();
        let refs: Vec<Vec<Token>> = idx.iter().map(|&i| references[i].clone()).collect();
        rows.push((len, idx.len(), bleu(&cands, &refs, max_n)?));
    }
    Ok(rows)
}

fn ngram_counts(seq: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for gram in seq.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}
