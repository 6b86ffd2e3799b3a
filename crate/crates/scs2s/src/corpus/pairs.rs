use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numeric::Rng;

use super::trace::{Trace, TraceLabel};
use super::vocab::{Token, Vocabulary};

/// One (source, target) training example produced by windowing a trace and
/// cutting the window at a proportional split point.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePair {
    pub source: Vec<Token>,
    pub target: Vec<Token>,
    /// Window length the pair was cut from: source.len() + target.len().
    pub window_len: usize,
    pub label: TraceLabel,
    pub origin: PathBuf,
}

/// Knobs for pair construction.
#[derive(Debug, Clone)]
pub struct PairConfig {
    /// Window lengths to slide over each trace.
    pub window_lengths: Vec<usize>,
    /// Source fraction candidates; one is drawn per window.
    pub split_ratios: Vec<f64>,
    /// Slide step for every window length.
    pub stride: usize,
    /// Fraction of traces assigned to the training side.
    pub train_fraction: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            window_lengths: vec![10, 12, 15, 18, 20, 22, 25, 30],
            split_ratios: vec![0.4, 0.5, 0.6, 0.7],
            stride: 1,
            train_fraction: 0.8,
        }
    }
}

/// Pair-construction bookkeeping: how many pairs each window length
/// produced and how many traces were too short to contribute.
#[derive(Debug, Clone, Default)]
pub struct PairReport {
    pub train_per_length: BTreeMap<usize, usize>,
    pub test_per_length: BTreeMap<usize, usize>,
    pub short_traces: usize,
}

impl PairReport {
    pub fn train_total(&self) -> usize {
        self.train_per_length.values().sum()
    }
    pub fn test_total(&self) -> usize {
        self.test_per_length.values().sum()
    }
}

/// Slides a window of each configured length over every trace, cuts each
/// window into source|target at ceil(r * L) where r is drawn from the
/// ratio set, and splits train/test at trace level so no trace contributes
/// windows to both sides.
pub fn make_pairs(
    traces: &[Trace],
    vocab: &Vocabulary,
    cfg: &PairConfig,
    rng: &mut Rng,
) -> Result<(Vec<SequencePair>, Vec<SequencePair>, PairReport)> {
    if cfg.stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    if cfg.window_lengths.is_empty() || cfg.split_ratios.is_empty() {
        return Err(Error::Config("window lengths and split ratios must be non-empty".into()));
    }
    for &r in &cfg.split_ratios {
        if !(0.0 < r && r < 1.0) {
            return Err(Error::Config(format!("split ratio {r} outside (0,1)")));
        }
    }

    // Trace-level split: shuffle indices, first train_fraction to train.
    let mut order: Vec<usize> = (0..traces.len()).collect();
    rng.shuffle(&mut order);
    let n_train = (traces.len() as f64 * cfg.train_fraction).round() as usize;
    let mut is_train = vec![false; traces.len()];
    for &idx in order.iter().take(n_train) {
        is_train[idx] = true;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut report = PairReport::default();
    let min_len = *cfg.window_lengths.iter().min().unwrap();

    for (idx, trace) in traces.iter().enumerate() {
        if trace.calls.len() < min_len {
            report.short_traces += 1;
            continue;
        }
        for &window_len in &cfg.window_lengths {
            if trace.calls.len() < window_len {
                continue;
            }
            let mut start = 0;
            while start + window_len <= trace.calls.len() {
                let window = &trace.calls[start..start + window_len];
                let ratio = *rng.choose(&cfg.split_ratios);
                let cut = (ratio * window_len as f64).ceil() as usize;
                debug_assert!(cut >= 1 && cut < window_len);
                let pair = SequencePair {
                    source: vocab.encode_seq(&window[..cut]),
                    target: vocab.encode_seq(&window[cut..]),
                    window_len,
                    label: trace.label.clone(),
                    origin: trace.origin.clone(),
                };
                let (side, counts) = if is_train[idx] {
                    (&mut train, &mut report.train_per_length)
                } else {
                    (&mut test, &mut report.test_per_length)
                };
                *counts.entry(window_len).or_insert(0) += 1;
                side.push(pair);
                start += cfg.stride;
            }
        }
    }

    Ok((train, test, report))
}

/// Writes pairs as TSV: `source<TAB>target<TAB>label`, where source and
/// target are space-separated raw call numbers.
pub fn write_pairs_tsv(path: &Path, pairs: &[SequencePair], vocab: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for pair in pairs {
        let src = join_raws(&vocab.decode_seq(&pair.source));
        let tgt = join_raws(&vocab.decode_seq(&pair.target));
        out.push_str(&format!("{src}\t{tgt}\t{}\n", pair.label));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads pairs back from the TSV format written by [`write_pairs_tsv`].
pub fn read_pairs_tsv(path: &Path, vocab: &Vocabulary) -> Result<Vec<SequencePair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (src, tgt, label) = match (cols.next(), cols.next(), cols.next()) {
            (Some(s), Some(t), Some(l)) => (s, t, l),
            _ => {
                return Err(Error::format(path, lineno + 1, "expected 3 tab-separated columns"))
            }
        };
        let source = parse_raw_seq(src, path, lineno + 1)?;
        let target = parse_raw_seq(tgt, path, lineno + 1)?;
        if source.is_empty() || target.is_empty() {
            return Err(Error::format(path, lineno + 1, "empty source or target"));
        }
        let label: TraceLabel = label
            .parse()
            .map_err(|e: Error| Error::format(path, lineno + 1, e.to_string()))?;
        pairs.push(SequencePair {
            window_len: source.len() + target.len(),
            source: vocab.encode_seq(&source),
            target: vocab.encode_seq(&target),
            label,
            origin: PathBuf::from(format!("{}:{}", path.display(), lineno + 1)),
        });
    }
    Ok(pairs)
}

fn parse_raw_seq(text: &str, path: &Path, lineno: usize) -> Result<Vec<u32>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<u32>()
                .map_err(|_| Error::format(path, lineno, format!("non-integer call {tok:?}")))
        })
        .collect()
}

fn join_raws(raws: &[u32]) -> String {
    raws.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
}
