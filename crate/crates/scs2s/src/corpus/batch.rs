use crate::numeric::Rng;

use super::pairs::SequencePair;
use super::vocab::{Token, BOS, EOS, PAD};

/// Size bounds of one padding bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucket {
    pub max_source_len: usize,
    pub max_target_len: usize,
}

/// Default buckets cover every window length / split ratio combination of
/// the default pair configuration.
pub fn default_buckets() -> Vec<Bucket> {
    [(8, 8), (12, 12), (16, 16), (24, 24)]
        .iter()
        .map(|&(s, t)| Bucket { max_source_len: s, max_target_len: t })
        .collect()
}

/// One padded mini-batch.
///
/// All rows share the bucket's bounds. `target_in` is the BOS-shifted gold
/// sequence fed to the decoder; `target_out` is the gold sequence with EOS
/// appended; `mask` is 1.0 exactly where `target_out` holds a real token
/// (including EOS) and 0.0 at PAD.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub source: Vec<Vec<Token>>,
    pub source_mask: Vec<Vec<f64>>,
    pub target_in: Vec<Vec<Token>>,
    pub target_out: Vec<Vec<Token>>,
    pub mask: Vec<Vec<f64>>,
    /// Index of the originating pair for each row, in caller order.
    pub pair_indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source_width(&self) -> usize {
        self.source.first().map_or(0, |r| r.len())
    }

    pub fn target_width(&self) -> usize {
        self.target_in.first().map_or(0, |r| r.len())
    }
}

/// Batch-construction bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct BatchReport {
    /// Pairs whose source was cut to fit the largest bucket.
    pub truncated_sources: usize,
    /// Pairs dropped because no bucket could hold their target.
    pub dropped_oversize: usize,
}

/// Assigns every pair to the smallest bucket that fits, shuffles within
/// buckets, and yields padded batches of at most `batch_size` rows.
///
/// Oversize sources are truncated from the front (the most recent calls
/// carry the predictive signal); targets are never truncated — a target
/// that exceeds the largest bucket drops the pair. Batch order across
/// buckets is shuffled with the same RNG, so an epoch is one deterministic
/// function of (pairs, buckets, batch_size, seed).
pub fn make_batches(
    pairs: &[SequencePair],
    buckets: &[Bucket],
    batch_size: usize,
    rng: &mut Rng,
) -> (Vec<Batch>, BatchReport) {
    assert!(batch_size > 0, "batch_size must be positive");
    assert!(!buckets.is_empty(), "at least one bucket required");
    let mut sorted_buckets: Vec<Bucket> = buckets.to_vec();
    sorted_buckets.sort_by_key(|b| (b.max_source_len + b.max_target_len, b.max_source_len));

    let mut report = BatchReport::default();
    let mut per_bucket: Vec<Vec<usize>> = vec![Vec::new(); sorted_buckets.len()];

    'pair: for (idx, pair) in pairs.iter().enumerate() {
        for (b, bucket) in sorted_buckets.iter().enumerate() {
            if pair.source.len() <= bucket.max_source_len
                && pair.target.len() <= bucket.max_target_len
            {
                per_bucket[b].push(idx);
                continue 'pair;
            }
        }
        // No exact fit: find any bucket whose target bound holds and
        // truncate the source from the front.
        let fallback = sorted_buckets
            .iter()
            .enumerate()
            .rev()
            .find(|(_, b)| pair.target.len() <= b.max_target_len);
        match fallback {
            Some((b, _)) => {
                report.truncated_sources += 1;
                per_bucket[b].push(idx);
            }
            None => report.dropped_oversize += 1,
        }
    }

    let mut batches = Vec::new();
    for (b, members) in per_bucket.iter_mut().enumerate() {
        rng.shuffle(members);
        let bucket = sorted_buckets[b];
        for chunk in members.chunks(batch_size) {
            batches.push(build_batch(pairs, chunk, bucket));
        }
    }
    rng.shuffle(&mut batches);
    (batches, report)
}

fn build_batch(pairs: &[SequencePair], indices: &[usize], bucket: Bucket) -> Batch {
    let s_len = bucket.max_source_len;
    let t_len = bucket.max_target_len + 1; // room for the BOS/EOS shift

    let mut batch = Batch {
        source: Vec::with_capacity(indices.len()),
        source_mask: Vec::with_capacity(indices.len()),
        target_in: Vec::with_capacity(indices.len()),
        target_out: Vec::with_capacity(indices.len()),
        mask: Vec::with_capacity(indices.len()),
        pair_indices: indices.to_vec(),
    };

    for &idx in indices {
        let pair = &pairs[idx];
        let src: &[Token] = if pair.source.len() > s_len {
            &pair.source[pair.source.len() - s_len..]
        } else {
            &pair.source
        };

        let mut source = vec![PAD; s_len];
        let mut source_mask = vec![0.0; s_len];
        source[..src.len()].copy_from_slice(src);
        for m in source_mask.iter_mut().take(src.len()) {
            *m = 1.0;
        }

        let mut target_in = vec![PAD; t_len];
        let mut target_out = vec![PAD; t_len];
        let mut mask = vec![0.0; t_len];
        target_in[0] = BOS;
        target_in[1..=pair.target.len()].copy_from_slice(&pair.target);
        target_out[..pair.target.len()].copy_from_slice(&pair.target);
        target_out[pair.target.len()] = EOS;
        for m in mask.iter_mut().take(pair.target.len() + 1) {
            *m = 1.0;
        }

        batch.source.push(source);
        batch.source_mask.push(source_mask);
        batch.target_in.push(target_in);
        batch.target_out.push(target_out);
        batch.mask.push(mask);
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::trace::TraceLabel;
    use std::path::PathBuf;

    fn pair(source: Vec<Token>, target: Vec<Token>) -> SequencePair {
        SequencePair {
            window_len: source.len() + target.len(),
            source,
            target,
            label: TraceLabel::Normal,
            origin: PathBuf::from("test"),
        }
    }

    #[test]
    fn pads_to_bucket_and_masks_real_tokens() {
        let pairs = vec![pair(vec![5, 6, 7, 8, 9], vec![10, 11, 12]), pair(vec![5; 6], vec![10; 4])];
        let buckets = vec![Bucket { max_source_len: 8, max_target_len: 8 }];
        let mut rng = Rng::new(1);
        let (batches, report) = make_batches(&pairs, &buckets, 64, &mut rng);
        assert_eq!(batches.len(), 1);
        assert_eq!(report.truncated_sources, 0);
        let b = &batches[0];
        assert_eq!(b.source_width(), 8);
        assert_eq!(b.target_width(), 9);
        for row in 0..b.len() {
            let pair = &pairs[b.pair_indices[row]];
            // Source padding after the real tokens.
            assert_eq!(&b.source[row][..pair.source.len()], pair.source.as_slice());
            assert!(b.source[row][pair.source.len()..].iter().all(|&t| t == PAD));
            // BOS shift.
            assert_eq!(b.target_in[row][0], BOS);
            assert_eq!(b.target_out[row][pair.target.len()], EOS);
            // Mask covers target tokens plus EOS, nothing else.
            let expect: f64 = (pair.target.len() + 1) as f64;
            assert_eq!(b.mask[row].iter().sum::<f64>(), expect);
            for (t, m) in b.target_out[row].iter().zip(&b.mask[row]) {
                assert_eq!(*m == 0.0, *t == PAD, "mask must be zero exactly at PAD");
            }
        }
    }

    #[test]
    fn batch_sizes_split_130_into_64_64_2() {
        let pairs: Vec<SequencePair> =
            (0..130).map(|_| pair(vec![5, 6, 7], vec![8, 9])).collect();
        let buckets = vec![Bucket { max_source_len: 8, max_target_len: 8 }];
        let mut rng = Rng::new(2);
        let (batches, _) = make_batches(&pairs, &buckets, 64, &mut rng);
        let mut sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 64, 64]);
    }

    #[test]
    fn smallest_fitting_bucket_wins_and_counts_add_up() {
        let pairs = vec![
            pair(vec![5; 4], vec![6; 4]),
            pair(vec![5; 10], vec![6; 10]),
            pair(vec![5; 14], vec![6; 15]),
        ];
        let buckets = default_buckets();
        let mut rng = Rng::new(3);
        let (batches, report) = make_batches(&pairs, &buckets, 64, &mut rng);
        let total: usize = batches.iter().map(|b| b.len()).sum();
        assert_eq!(total + report.dropped_oversize, pairs.len());
        let widths: std::collections::HashSet<usize> =
            batches.iter().map(|b| b.source_width()).collect();
        assert_eq!(widths, [8usize, 12, 16].into_iter().collect());
    }

    #[test]
    fn oversize_source_truncates_from_front() {
        let src: Vec<Token> = (4..44).collect(); // length 40 > largest bucket
        let pairs = vec![pair(src.clone(), vec![7; 5])];
        let buckets = default_buckets();
        let mut rng = Rng::new(4);
        let (batches, report) = make_batches(&pairs, &buckets, 64, &mut rng);
        assert_eq!(report.truncated_sources, 1);
        let b = &batches[0];
        // Keeps the most recent 24 calls.
        assert_eq!(&b.source[0][..], &src[40 - 24..]);
    }

    #[test]
    fn oversize_target_drops_pair() {
        let pairs = vec![pair(vec![5; 4], vec![6; 40])];
        let (batches, report) = make_batches(&pairs, &default_buckets(), 64, &mut Rng::new(5));
        assert!(batches.is_empty());
        assert_eq!(report.dropped_oversize, 1);
    }

    #[test]
    fn epoch_reproducible_under_seed() {
        let pairs: Vec<SequencePair> = (0..300)
            .map(|i| pair(vec![4 + (i % 7) as Token; 3 + i % 9], vec![5; 2 + i % 6]))
            .collect();
        let buckets = default_buckets();
        let (a, _) = make_batches(&pairs, &buckets, 32, &mut Rng::new(42));
        let (b, _) = make_batches(&pairs, &buckets, 32, &mut Rng::new(42));
        assert_eq!(a, b);
        let (c, _) = make_batches(&pairs, &buckets, 32, &mut Rng::new(43));
        assert_ne!(a, c);
    }
}
