use crate::corpus::{Batch, Token};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Rng};

use super::attention::{
    attention_backward, attention_forward, AttentionCache, AttentionState, EncProjection,
};
use super::cell::{cell_backward, cell_forward, StepCache};
use super::Seq2Seq;

/// Dropout mode for a forward pass. Masks are drawn from the provided RNG
/// (inverted dropout: kept entries scale by 1/keep), so a seeded run
/// replays bit-exactly.
pub(crate) enum Dropout<'a> {
    Off,
    On { keep: f64, rng: &'a mut Rng },
}

impl Dropout<'_> {
    /// Applies dropout, returning the (possibly) dropped matrix and the
    /// mask needed to route gradients back.
    fn apply(&mut self, m: &Matrix) -> (Matrix, Option<Matrix>) {
        match self {
            Dropout::Off => (m.clone(), None),
            Dropout::On { keep, rng } => {
                if *keep >= 1.0 {
                    return (m.clone(), None);
                }
                let scale = 1.0 / *keep;
                let mask =
                    Matrix::from_fn(m.rows(), m.cols(), |_, _| {
                        if rng.bernoulli(*keep) {
                            scale
                        } else {
                            0.0
                        }
                    });
                (m.hadamard(&mask), Some(mask))
            }
        }
    }
}

fn apply_mask(d: &Matrix, mask: &Option<Matrix>) -> Matrix {
    match mask {
        Some(m) => d.hadamard(m),
        None => d.clone(),
    }
}

/// What the encoder exposes to the decoder: the top layer's hidden state
/// at every source step, the final state of every layer (the last entry is
/// the context vector c), and the source mask.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub top_states: Vec<Matrix>,
    pub finals: Vec<Matrix>,
    pub source_mask: Vec<Vec<f64>>,
}

impl EncoderOutput {
    /// The encoded information vector c: the top layer's final state.
    pub fn context(&self) -> &Matrix {
        self.finals.last().expect("encoder has at least one layer")
    }
}

pub(crate) struct EncoderCache {
    /// steps[layer][t]
    steps: Vec<Vec<StepCache>>,
    /// Per-step source-mask column, batch x 1.
    gate_cols: Vec<Matrix>,
    /// Dropout masks on each layer's input: input_masks[layer][t].
    input_masks: Vec<Vec<Option<Matrix>>>,
}

pub(crate) struct DecoderCache {
    /// steps[t][layer]
    steps: Vec<Vec<StepCache>>,
    att: Vec<AttentionCache>,
    enc_proj: Option<EncProjection>,
    emb_masks: Vec<Option<Matrix>>,
    /// interlayer_masks[t][layer-1] is the mask on layer `layer`'s input.
    interlayer_masks: Vec<Vec<Option<Matrix>>>,
    out_masks: Vec<Option<Matrix>>,
    /// Softmax probabilities per step, batch x vocab.
    probs: Vec<Matrix>,
    /// Projection inputs per step ([s ; c] with attention, s without).
    proj_in: Vec<Matrix>,
}

pub(crate) struct ForwardPass {
    pub loss: f64,
    pub denom: f64,
    pub enc: EncoderOutput,
    pub enc_cache: EncoderCache,
    pub dec_cache: DecoderCache,
    pub attention_states: Option<Vec<AttentionState>>,
}

/// Runs the encoder left to right. PAD steps copy the previous hidden
/// state (mask-gated), so trailing padding never alters the context.
pub(crate) fn encode_with_cache(
    model: &Seq2Seq,
    source: &[Vec<Token>],
    source_mask: &[Vec<f64>],
    dropout: &mut Dropout,
) -> Result<(EncoderOutput, EncoderCache)> {
    let batch = source.len();
    if batch == 0 || source[0].is_empty() {
        return Err(Error::Input("empty source batch".into()));
    }
    let src_len = source[0].len();
    let layers = model.config().layers;
    let hidden = model.config().hidden;

    let mut cache = EncoderCache {
        steps: vec![Vec::with_capacity(src_len); layers],
        gate_cols: Vec::with_capacity(src_len),
        input_masks: vec![Vec::with_capacity(src_len); layers],
    };

    // Layer inputs for the current time step, starting from embeddings.
    let mut hidden_states: Vec<Matrix> = vec![Matrix::zeros(batch, hidden); layers];
    let mut top_states = Vec::with_capacity(src_len);

    for t in 0..src_len {
        let tokens: Vec<Token> = source.iter().map(|row| row[t]).collect();
        let gate = Matrix::from_fn(batch, 1, |b, _| source_mask[b][t]);

        let mut input = model.embed(&tokens)?;
        for layer in 0..layers {
            let (dropped, mask) = dropout.apply(&input);
            cache.input_masks[layer].push(mask);

            let (mut h_cell, step) = cell_forward(
                model.params(),
                &model.handles().encoder[layer],
                &dropped,
                &hidden_states[layer],
            );
            cache.steps[layer].push(step);
            // Residual identity path keeps deep stacks trainable; layer 0
            // has an embedding input, so it starts the chain instead.
            if layer > 0 {
                h_cell.add_assign(&input);
            }

            // Gate: PAD steps keep the previous hidden state.
            let keep_prev = gate.map(|m| 1.0 - m);
            let mut h_next = h_cell.scale_rows(&gate);
            h_next.add_assign(&hidden_states[layer].scale_rows(&keep_prev));
            hidden_states[layer] = h_next;
            input = hidden_states[layer].clone();
        }
        cache.gate_cols.push(gate);
        top_states.push(hidden_states[layers - 1].clone());
    }

    let out = EncoderOutput {
        top_states,
        finals: hidden_states,
        source_mask: source_mask.to_vec(),
    };
    Ok((out, cache))
}

/// Full teacher-forced forward pass: encode, decode, masked cross-entropy.
pub(crate) fn forward(
    model: &Seq2Seq,
    batch: &Batch,
    dropout_rng: Option<&mut Rng>,
) -> Result<ForwardPass> {
    let mut dropout = match dropout_rng {
        Some(rng) => Dropout::On { keep: model.config().dropout_keep, rng },
        None => Dropout::Off,
    };

    let (enc, enc_cache) = encode_with_cache(model, &batch.source, &batch.source_mask, &mut dropout)?;

    let rows = batch.len();
    let tgt_len = batch.target_width();
    let layers = model.config().layers;
    let with_attention = model.config().attention;
    let params = model.params();
    let handles = model.handles();

    let enc_proj = with_attention.then(|| {
        EncProjection::build(params, handles.attention.as_ref().unwrap(), &enc.top_states)
    });
    let mut dec_cache = DecoderCache {
        steps: Vec::with_capacity(tgt_len),
        att: Vec::new(),
        enc_proj,
        emb_masks: Vec::with_capacity(tgt_len),
        interlayer_masks: Vec::with_capacity(tgt_len),
        out_masks: Vec::with_capacity(tgt_len),
        probs: Vec::with_capacity(tgt_len),
        proj_in: Vec::with_capacity(tgt_len),
    };
    let mut attention_states = with_attention.then(Vec::new);

    let mut dec_hidden: Vec<Matrix> = enc.finals.clone();
    let fixed_context = enc.context().clone();

    let mut total_nll = 0.0;
    let mut denom = 0.0;
    for row in &batch.mask {
        denom += row.iter().sum::<f64>();
    }

    for t in 0..tgt_len {
        // Attention aligns the decoder state from the previous step.
        let context = if with_attention {
            let slots = handles.attention.as_ref().unwrap();
            let (state, att_cache) = attention_forward(
                params,
                slots,
                &dec_hidden[layers - 1],
                dec_cache.enc_proj.as_ref().unwrap(),
                &enc.source_mask,
            );
            let ctx = state.context.clone();
            if let Some(states) = attention_states.as_mut() {
                states.push(state);
            }
            dec_cache.att.push(att_cache);
            ctx
        } else {
            fixed_context.clone()
        };

        let tokens: Vec<Token> = batch.target_in.iter().map(|row| row[t]).collect();
        let emb = model.embed(&tokens)?;
        let (emb_dropped, emb_mask) = dropout.apply(&emb);
        dec_cache.emb_masks.push(emb_mask);

        let mut step_caches = Vec::with_capacity(layers);
        let mut inter_masks = Vec::with_capacity(layers.saturating_sub(1));
        let mut prev_output = emb_dropped.concat_cols(&context);
        for layer in 0..layers {
            let cell_input = if layer == 0 {
                prev_output.clone()
            } else {
                let (dropped, mask) = dropout.apply(&prev_output);
                inter_masks.push(mask);
                dropped
            };
            let (mut h_new, step) =
                cell_forward(params, &handles.decoder[layer], &cell_input, &dec_hidden[layer]);
            step_caches.push(step);
            if layer > 0 {
                h_new.add_assign(&prev_output);
            }
            dec_hidden[layer] = h_new;
            prev_output = dec_hidden[layer].clone();
        }
        dec_cache.steps.push(step_caches);
        dec_cache.interlayer_masks.push(inter_masks);

        let (s_dropped, out_mask) = dropout.apply(&dec_hidden[layers - 1]);
        dec_cache.out_masks.push(out_mask);
        let proj_in = if with_attention {
            s_dropped.concat_cols(&context)
        } else {
            s_dropped
        };

        let mut logits = proj_in.matmul(params.value(handles.out_w))?;
        logits.add_row_broadcast(params.value(handles.out_b));
        dec_cache.proj_in.push(proj_in);

        // Stable log-softmax + masked NLL; keep probabilities for backward.
        let mut probs = Matrix::zeros(rows, logits.cols());
        for b in 0..rows {
            let row = logits.row(b);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &l) in probs.row_mut(b).iter_mut().zip(row) {
                *p = (l - max).exp();
                sum += *p;
            }
            for p in probs.row_mut(b) {
                *p /= sum;
            }
            let m = batch.mask[b][t];
            if m != 0.0 {
                let gold = batch.target_out[b][t] as usize;
                if gold >= probs.cols() {
                    return Err(Error::Input(format!(
                        "target token {gold} out of range at step {t}"
                    )));
                }
                let log_p = (logits.at(b, gold) - max) - sum.ln();
                total_nll -= m * log_p;
            }
        }
        if !total_nll.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became non-finite at decode step {t} (accumulated {total_nll})"
            )));
        }
        dec_cache.probs.push(probs);
    }

    let loss = if denom > 0.0 { total_nll / denom } else { 0.0 };
    Ok(ForwardPass { loss, denom, enc, enc_cache, dec_cache, attention_states })
}

/// Backpropagation through time over the whole model. Gradients accumulate
/// into the parameter store.
pub(crate) fn backward(model: &mut Seq2Seq, batch: &Batch, fwd: ForwardPass) -> Result<()> {
    if fwd.denom == 0.0 {
        return Ok(()); // loss is identically zero: nothing to propagate
    }
    let rows = batch.len();
    let src_len = batch.source_width();
    let tgt_len = batch.target_width();
    let layers = model.config().layers;
    let hidden = model.config().hidden;
    let with_attention = model.config().attention;
    let handles = model.handles().clone();

    let ForwardPass { denom, enc, enc_cache, dec_cache, .. } = fwd;

    // Gradient w.r.t. the encoder top states, stacked like EncProjection.
    let mut d_top_stacked = Matrix::zeros(src_len * rows, hidden);
    let mut d_finals: Vec<Matrix> = vec![Matrix::zeros(rows, hidden); layers];
    let mut dc_fixed = Matrix::zeros(rows, hidden);
    let mut dh_dec: Vec<Matrix> = vec![Matrix::zeros(rows, hidden); layers];

    for t in (0..tgt_len).rev() {
        // d logits = (softmax - onehot) * mask / denom, per row.
        let mut d_logits = dec_cache.probs[t].clone();
        for b in 0..rows {
            let m = batch.mask[b][t];
            if m == 0.0 {
                d_logits.row_mut(b).fill(0.0);
                continue;
            }
            let gold = batch.target_out[b][t] as usize;
            let scale = m / denom;
            let row = d_logits.row_mut(b);
            row[gold] -= 1.0;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }

        let proj_in = &dec_cache.proj_in[t];
        {
            let params = model.params_mut();
            let gw = proj_in.matmul_at_b(&d_logits)?;
            params.grad_mut(handles.out_w).add_assign(&gw);
            params.grad_mut(handles.out_b).add_assign(&d_logits.sum_rows());
        }
        let d_proj = d_logits.matmul_a_bt(model.params().value(handles.out_w))?;

        let (d_s_dropped, mut d_context) = if with_attention {
            d_proj.split_cols(hidden)
        } else {
            (d_proj, Matrix::zeros(rows, hidden))
        };
        dh_dec[layers - 1].add_assign(&apply_mask(&d_s_dropped, &dec_cache.out_masks[t]));

        // Through the decoder stack, top to bottom. For layers above the
        // first, the gradient reaching h_{l-1} is the cell-input gradient
        // (through its dropout mask) plus the residual identity path.
        let mut d_from_above: Option<(Matrix, Matrix)> = None;
        for layer in (0..layers).rev() {
            if let Some((dx, d_identity)) = d_from_above.take() {
                dh_dec[layer]
                    .add_assign(&apply_mask(&dx, &dec_cache.interlayer_masks[t][layer]));
                dh_dec[layer].add_assign(&d_identity);
            }
            let dh = dh_dec[layer].clone();
            let (dx, dh_prev) = cell_backward(
                model.params_mut(),
                &handles.decoder[layer],
                &dec_cache.steps[t][layer],
                &dh,
            );
            dh_dec[layer] = dh_prev;
            if layer > 0 {
                d_from_above = Some((dx, dh));
            } else {
                let (d_emb_dropped, d_ctx_in) = dx.split_cols(hidden);
                d_context.add_assign(&d_ctx_in);
                let d_emb = apply_mask(&d_emb_dropped, &dec_cache.emb_masks[t]);
                accumulate_embedding(model, &batch.target_in, t, &d_emb);
            }
        }

        if with_attention {
            let d_s_prev = attention_backward(
                model.params_mut(),
                handles.attention.as_ref().unwrap(),
                &dec_cache.att[t],
                dec_cache.enc_proj.as_ref().unwrap(),
                &d_context,
                &mut d_top_stacked,
            );
            dh_dec[layers - 1].add_assign(&d_s_prev);
        } else {
            dc_fixed.add_assign(&d_context);
        }
    }

    // Decoder initial state came from the encoder finals; the fixed
    // context is the top layer's final state.
    for (d_final, dh) in d_finals.iter_mut().zip(&dh_dec) {
        d_final.add_assign(dh);
    }
    d_finals[layers - 1].add_assign(&dc_fixed);

    // Encoder BPTT, top layer first so lower layers see d(input) early.
    let mut d_inputs_above: Option<Vec<Matrix>> = None;
    for layer in (0..layers).rev() {
        let mut d_inputs_below: Vec<Matrix> = Vec::with_capacity(src_len);
        let mut dh_carry = Matrix::zeros(rows, hidden);
        for t in (0..src_len).rev() {
            let mut dh_t = dh_carry;
            if layer == layers - 1 {
                for b in 0..rows {
                    let src = d_top_stacked.row(t * rows + b);
                    for (g, &d) in dh_t.row_mut(b).iter_mut().zip(src) {
                        *g += d;
                    }
                }
            } else if let Some(above) = &d_inputs_above {
                dh_t.add_assign(&above[t]);
            }
            if t == src_len - 1 {
                dh_t.add_assign(&d_finals[layer]);
            }

            // Mask gate: PAD rows pass the gradient straight through.
            let gate = &enc_cache.gate_cols[t];
            let keep_prev = gate.map(|m| 1.0 - m);
            let dh_cell = dh_t.scale_rows(gate);
            let dh_gate_prev = dh_t.scale_rows(&keep_prev);

            let (dx, dh_prev) = cell_backward(
                model.params_mut(),
                &handles.encoder[layer],
                &enc_cache.steps[layer][t],
                &dh_cell,
            );
            dh_carry = dh_prev;
            dh_carry.add_assign(&dh_gate_prev);

            let mut d_input = apply_mask(&dx, &enc_cache.input_masks[layer][t]);
            if layer > 0 {
                // Residual identity path back to the layer below.
                d_input.add_assign(&dh_cell);
            }
            d_inputs_below.push(d_input);
        }
        d_inputs_below.reverse();
        if layer == 0 {
            for (t, d_emb) in d_inputs_below.iter().enumerate() {
                accumulate_embedding(model, &batch.source, t, d_emb);
            }
        }
        d_inputs_above = Some(d_inputs_below);
    }

    Ok(())
}

/// Scatters a [batch x hidden] gradient into the embedding rows selected
/// by column `t` of the token matrix.
fn accumulate_embedding(model: &mut Seq2Seq, tokens: &[Vec<Token>], t: usize, d_emb: &Matrix) {
    let id = model.handles().embedding;
    let grad = model.params_mut().grad_mut(id);
    for (b, row) in tokens.iter().enumerate() {
        let tok = row[t] as usize;
        for (g, &d) in grad.row_mut(tok).iter_mut().zip(d_emb.row(b)) {
            *g += d;
        }
    }
}
