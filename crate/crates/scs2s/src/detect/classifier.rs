use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::model::{cell_backward, cell_forward, CellKind, CellSlots, StepCache};
use crate::numeric::{sigmoid_scalar, Matrix, ParamStore, Rng};

use super::features::NgramTable;
use super::LabeledSequence;

/// Desk-scale classifier families standing in for the heavyweight
/// baselines: logistic regression over TF-IDF n-gram features, and a
/// single-layer GRU with mean-pooled hidden state and a logistic head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    LogregNgram,
    GruPool,
}

impl ClassifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::LogregNgram => "logreg_ngram",
            ClassifierKind::GruPool => "gru_pool",
        }
    }

    pub fn parse(s: &str) -> Option<ClassifierKind> {
        match s {
            "logreg_ngram" => Some(ClassifierKind::LogregNgram),
            "gru_pool" => Some(ClassifierKind::GruPool),
            _ => None,
        }
    }
}

/// A trained scorer: maps a token sequence to a risk in [0, 1].
#[derive(Debug, Clone)]
pub enum Classifier {
    Logreg { table: NgramTable, weights: Vec<f64>, bias: f64 },
    GruPool { params: ParamStore, slots: CellSlots, hidden: usize, vocab_size: usize },
}

const LOGREG_EPOCHS: usize = 200;
const LOGREG_LR: f64 = 2.0;
const GRU_POOL_HIDDEN: usize = 16;
const GRU_POOL_EPOCHS: usize = 8;
const GRU_POOL_LR: f64 = 0.5;

/// Trains a classifier of the requested kind; deterministic under `seed`.
/// A single-class training set is an error.
pub fn train_classifier(
    kind: ClassifierKind,
    train: &[LabeledSequence],
    n_max: usize,
    seed: u64,
) -> Result<Classifier> {
    let n_pos = train.iter().filter(|s| s.label == 1).count();
    if n_pos == 0 || n_pos == train.len() {
        return Err(Error::Input(format!(
            "classifier training set must contain both labels ({n_pos}/{} positive)",
            train.len()
        )));
    }
    match kind {
        ClassifierKind::LogregNgram => train_logreg(train, n_max),
        ClassifierKind::GruPool => train_gru_pool(train, seed),
    }
}

impl Classifier {
    /// Risk score in [0, 1]; higher means more attack-like.
    pub fn risk(&self, seq: &[Token]) -> f64 {
        match self {
            Classifier::Logreg { table, weights, bias } => {
                let features = table.featurize(seq);
                let z: f64 =
                    features.iter().map(|(i, w)| w * weights[*i]).sum::<f64>() + bias;
                sigmoid_scalar(z)
            }
            Classifier::GruPool { params, slots, hidden, vocab_size } => {
                let pooled = gru_pool_forward(params, slots, seq, *hidden, *vocab_size).0;
                let w = params.value(params.id("pool.w").unwrap());
                let b = params.value(params.id("pool.b").unwrap()).at(0, 0);
                let z: f64 =
                    pooled.row(0).iter().zip(w.data()).map(|(h, w)| h * w).sum::<f64>() + b;
                sigmoid_scalar(z)
            }
        }
    }
}

/// Full-batch gradient descent from a zero init. The zero start makes the
/// label-flip symmetry exact: flipping labels negates every gradient, so
/// the flipped scorer is 1 - scorer.
fn train_logreg(train: &[LabeledSequence], n_max: usize) -> Result<Classifier> {
    let sequences: Vec<Vec<Token>> = train.iter().map(|s| s.tokens.clone()).collect();
    let table = NgramTable::build(&sequences, n_max);
    let features: Vec<Vec<(usize, f64)>> =
        sequences.iter().map(|s| table.featurize(s)).collect();

    let mut weights = vec![0.0f64; table.dim()];
    let mut bias = 0.0f64;
    let inv_n = 1.0 / train.len() as f64;

    for _ in 0..LOGREG_EPOCHS {
        let mut grad_w = vec![0.0f64; weights.len()];
        let mut grad_b = 0.0f64;
        for (sample, feats) in train.iter().zip(&features) {
            let z: f64 = feats.iter().map(|(i, w)| w * weights[*i]).sum::<f64>() + bias;
            let err = sigmoid_scalar(z) - sample.label as f64;
            for (i, w) in feats {
                grad_w[*i] += err * w;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= LOGREG_LR * g * inv_n;
        }
        bias -= LOGREG_LR * grad_b * inv_n;
    }
    Ok(Classifier::Logreg { table, weights, bias })
}

fn gru_pool_vocab(train: &[LabeledSequence]) -> usize {
    train
        .iter()
        .flat_map(|s| s.tokens.iter())
        .max()
        .map(|&t| t as usize + 1)
        .unwrap_or(1)
}

/// Embeds tokens, runs the GRU, mean-pools the hidden states. Returns the
/// pooled vector and the per-step caches needed for backward.
fn gru_pool_forward(
    params: &ParamStore,
    slots: &CellSlots,
    seq: &[Token],
    hidden: usize,
    vocab_size: usize,
) -> (Matrix, Vec<StepCache>) {
    let emb = params.value(params.id("pool.emb").unwrap());
    let mut h = Matrix::zeros(1, hidden);
    let mut pooled = Matrix::zeros(1, hidden);
    let mut caches = Vec::with_capacity(seq.len());
    for &tok in seq {
        let idx = (tok as usize).min(vocab_size - 1);
        let x = Matrix::from_vec(1, emb.cols(), emb.row(idx).to_vec());
        let (h_new, cache) = cell_forward(params, slots, &x, &h);
        pooled.add_assign(&h_new);
        caches.push(cache);
        h = h_new;
    }
    pooled.scale(1.0 / seq.len().max(1) as f64);
    (pooled, caches)
}

/// Single-layer GRU over tokens, mean-pooled, logistic output. SGD one
/// sequence at a time in a seed-shuffled order.
fn train_gru_pool(train: &[LabeledSequence], seed: u64) -> Result<Classifier> {
    let vocab_size = gru_pool_vocab(train);
    let hidden = GRU_POOL_HIDDEN;
    let mut rng = Rng::new(seed);
    let mut params = ParamStore::new();
    params.add_uniform("pool.emb", vocab_size, hidden, 0.08, &mut rng);
    let slots = CellSlots::register(CellKind::Gru, &mut params, "pool.gru", hidden, hidden, &mut rng);
    params.add_uniform("pool.w", 1, hidden, 0.08, &mut rng);
    params.add("pool.b", Matrix::zeros(1, 1));

    let w_id = params.id("pool.w").unwrap();
    let b_id = params.id("pool.b").unwrap();
    let emb_id = params.id("pool.emb").unwrap();

    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..GRU_POOL_EPOCHS {
        rng.shuffle(&mut order);
        for &idx in &order {
            let sample = &train[idx];
            if sample.tokens.is_empty() {
                continue;
            }
            params.zero_grads();
            let (pooled, caches) =
                gru_pool_forward(&params, &slots, &sample.tokens, hidden, vocab_size);
            let w = params.value(w_id).clone();
            let z: f64 =
                pooled.row(0).iter().zip(w.data()).map(|(h, wv)| h * wv).sum::<f64>()
                    + params.value(b_id).at(0, 0);
            let err = sigmoid_scalar(z) - sample.label as f64;

            // Head gradients.
            params.grad_mut(w_id).add_scaled(err, &pooled);
            params.grad_mut(b_id).data_mut()[0] += err;
            // d pooled = err * w; every step's hidden receives d/T.
            let t_count = sample.tokens.len() as f64;
            let mut dh_shared = w.clone();
            dh_shared.scale(err / t_count);

            let mut dh_carry = Matrix::zeros(1, hidden);
            for (t, cache) in caches.iter().enumerate().rev() {
                let mut dh = dh_carry;
                dh.add_assign(&dh_shared);
                let (dx, dh_prev) = cell_backward(&mut params, &slots, cache, &dh);
                dh_carry = dh_prev;
                let tok = (sample.tokens[t] as usize).min(vocab_size - 1);
                let grad = params.grad_mut(emb_id);
                for (g, &d) in grad.row_mut(tok).iter_mut().zip(dx.row(0)) {
                    *g += d;
                }
            }
            crate::train::clip_gradients(&mut params, 5.0);
            params.sgd_step(GRU_POOL_LR);
        }
    }
    Ok(Classifier::GruPool { params, slots, hidden, vocab_size })
}
