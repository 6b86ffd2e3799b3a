use crate::numeric::{Matrix, ParamStore, Rng, SlotId};

use super::INIT_RANGE;

/// Additive (tanh-MLP) attention parameters:
/// e_ij = tanh(s_prev Ws + h_j Uh + b) v
#[derive(Debug, Clone)]
pub struct AttentionSlots {
    pub ws: SlotId,
    pub uh: SlotId,
    pub v: SlotId,
    pub b: SlotId,
}

impl AttentionSlots {
    pub fn register(store: &mut ParamStore, hidden: usize, rng: &mut Rng) -> AttentionSlots {
        AttentionSlots {
            ws: store.add_uniform("att.ws", hidden, hidden, INIT_RANGE, rng),
            uh: store.add_uniform("att.uh", hidden, hidden, INIT_RANGE, rng),
            v: store.add_uniform("att.v", hidden, 1, INIT_RANGE, rng),
            b: store.add_uniform("att.b", 1, hidden, INIT_RANGE, rng),
        }
    }
}

/// One decode step's alignment: raw scores, normalized weights, and the
/// context vector c_i = sum_j a_ij h_j. Weights are exactly zero at PAD
/// source positions and each row sums to one. Scores are reported as zero
/// at PAD positions (they are never used there).
#[derive(Debug, Clone)]
pub struct AttentionState {
    pub scores: Matrix,
    pub weights: Matrix,
    pub context: Matrix,
}

/// Encoder-side projection shared by every decode step of a batch: the
/// top states stacked into one (src_len * batch) x hidden matrix, and its
/// product with Uh. Row j*batch + b holds position j of batch row b.
#[derive(Debug, Clone)]
pub(crate) struct EncProjection {
    pub stacked: Matrix,
    pub u_enc: Matrix,
    pub src_len: usize,
    pub batch: usize,
}

impl EncProjection {
    pub fn build(params: &ParamStore, slots: &AttentionSlots, top_states: &[Matrix]) -> Self {
        let src_len = top_states.len();
        let batch = top_states[0].rows();
        let hidden = top_states[0].cols();
        let mut stacked = Matrix::zeros(src_len * batch, hidden);
        for (j, h_j) in top_states.iter().enumerate() {
            for b in 0..batch {
                stacked.row_mut(j * batch + b).copy_from_slice(h_j.row(b));
            }
        }
        let u_enc = stacked.matmul(params.value(slots.uh)).unwrap();
        EncProjection { stacked, u_enc, src_len, batch }
    }
}

/// Backward bookkeeping for one attention step.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pub s_prev: Matrix,
    /// tanh(q + h_j Uh + b) stacked like [`EncProjection`].
    pub tact: Matrix,
    pub weights: Matrix,
}

/// Computes alignment of `s_prev` (decoder hidden before this step)
/// against the encoder's top-layer states.
pub(crate) fn attention_forward(
    params: &ParamStore,
    slots: &AttentionSlots,
    s_prev: &Matrix,
    enc: &EncProjection,
    source_mask: &[Vec<f64>],
) -> (AttentionState, AttentionCache) {
    let batch = enc.batch;
    let src_len = enc.src_len;
    let hidden = s_prev.cols();

    let mut q = s_prev.matmul(params.value(slots.ws)).unwrap();
    q.add_row_broadcast(params.value(slots.b));

    // pre[j*B + b] = u_enc[j*B + b] + q[b]; tact = tanh(pre); e = tact v.
    let mut tact = enc.u_enc.clone();
    for j in 0..src_len {
        for b in 0..batch {
            let row = tact.row_mut(j * batch + b);
            for (t, &qv) in row.iter_mut().zip(q.row(b)) {
                *t = (*t + qv).tanh();
            }
        }
    }
    let e_flat = tact.matmul(params.value(slots.v)).unwrap();
    let mut scores = Matrix::zeros(batch, src_len);
    for j in 0..src_len {
        for b in 0..batch {
            scores.set(b, j, e_flat.at(j * batch + b, 0));
        }
    }

    // Masked softmax per row: PAD positions get weight exactly zero.
    let mut weights = Matrix::zeros(batch, src_len);
    for b in 0..batch {
        let mut max = f64::NEG_INFINITY;
        for j in 0..src_len {
            if source_mask[b][j] != 0.0 {
                max = max.max(scores.at(b, j));
            }
        }
        let mut sum = 0.0;
        for j in 0..src_len {
            if source_mask[b][j] != 0.0 {
                let w = (scores.at(b, j) - max).exp();
                weights.set(b, j, w);
                sum += w;
            }
        }
        for j in 0..src_len {
            let w = weights.at(b, j);
            weights.set(b, j, w / sum);
        }
    }

    // c = sum_j a_j * h_j
    let mut context = Matrix::zeros(batch, hidden);
    for j in 0..src_len {
        for b in 0..batch {
            let a = weights.at(b, j);
            if a == 0.0 {
                continue;
            }
            let h_row = enc.stacked.row(j * batch + b);
            for (c, &h) in context.row_mut(b).iter_mut().zip(h_row) {
                *c += a * h;
            }
        }
    }

    // Zero out reported scores at PAD positions.
    for b in 0..batch {
        for j in 0..src_len {
            if source_mask[b][j] == 0.0 {
                scores.set(b, j, 0.0);
            }
        }
    }

    let state = AttentionState { scores, weights: weights.clone(), context };
    let cache = AttentionCache { s_prev: s_prev.clone(), tact, weights };
    (state, cache)
}

/// Backward through one attention step given d(context).
///
/// Accumulates attention parameter gradients, adds encoder-state gradients
/// into `d_stacked` (laid out like [`EncProjection`]), and returns
/// d(s_prev).
pub(crate) fn attention_backward(
    params: &mut ParamStore,
    slots: &AttentionSlots,
    cache: &AttentionCache,
    enc: &EncProjection,
    d_context: &Matrix,
    d_stacked: &mut Matrix,
) -> Matrix {
    let batch = enc.batch;
    let src_len = enc.src_len;
    let hidden = d_context.cols();

    // d a_j = <d_context, h_j> per row; dh_j += a_j * d_context.
    let mut d_weights = Matrix::zeros(batch, src_len);
    for j in 0..src_len {
        for b in 0..batch {
            let h_row = enc.stacked.row(j * batch + b);
            let mut acc = 0.0;
            for (&d, &h) in d_context.row(b).iter().zip(h_row) {
                acc += d * h;
            }
            d_weights.set(b, j, acc);
            let a = cache.weights.at(b, j);
            if a != 0.0 {
                let out = d_stacked.row_mut(j * batch + b);
                for (g, &d) in out.iter_mut().zip(d_context.row(b)) {
                    *g += a * d;
                }
            }
        }
    }

    // Softmax backward: de_j = a_j * (da_j - sum_k a_k da_k).
    // PAD positions have a_j = 0, so their de_j vanishes automatically.
    let mut de_flat = Matrix::zeros(src_len * batch, 1);
    for b in 0..batch {
        let mut dot = 0.0;
        for j in 0..src_len {
            dot += cache.weights.at(b, j) * d_weights.at(b, j);
        }
        for j in 0..src_len {
            let de = cache.weights.at(b, j) * (d_weights.at(b, j) - dot);
            de_flat.set(j * batch + b, 0, de);
        }
    }

    // Through e = tact v, then tanh.
    params.grad_mut(slots.v).add_assign(&cache.tact.matmul_at_b(&de_flat).unwrap());
    let d_tact = de_flat.matmul_a_bt(params.value(slots.v)).unwrap();
    let d_pre = d_tact.hadamard(&cache.tact.map(|v| 1.0 - v * v));

    params.grad_mut(slots.uh).add_assign(&enc.stacked.matmul_at_b(&d_pre).unwrap());
    d_stacked.add_assign(&d_pre.matmul_a_bt(params.value(slots.uh)).unwrap());

    // dq[b] = sum_j d_pre[j*B + b].
    let mut dq = Matrix::zeros(batch, hidden);
    for j in 0..src_len {
        for b in 0..batch {
            let src = d_pre.row(j * batch + b);
            for (g, &d) in dq.row_mut(b).iter_mut().zip(src) {
                *g += d;
            }
        }
    }

    params.grad_mut(slots.ws).add_assign(&cache.s_prev.matmul_at_b(&dq).unwrap());
    params.grad_mut(slots.b).add_assign(&dq.sum_rows());
    dq.matmul_a_bt(params.value(slots.ws)).unwrap()
}
