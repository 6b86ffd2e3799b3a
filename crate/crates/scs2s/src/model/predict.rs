use crate::corpus::{Token, BOS, EOS};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

use super::attention::{attention_forward, EncProjection};
use super::cell::cell_forward;
use super::net::EncoderOutput;
use super::Seq2Seq;

/// Decoding strategy. Greedy takes the argmax at every step (ties break
/// toward the lowest token id); beam(k) keeps the k best hypotheses by
/// summed log-probability and picks the length-normalized best at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

#[derive(Clone)]
struct Hypothesis {
    tokens: Vec<Token>,
    /// Sum of log-probabilities of every emitted token (EOS included).
    score: f64,
    /// Number of emissions contributing to `score`.
    emitted: usize,
    hidden: Vec<Matrix>,
    ended: bool,
}

impl Seq2Seq {
    /// Predicts the continuation of `source`, stopping at EOS or after
    /// `max_len` tokens. The returned sequence never contains EOS.
    pub fn predict(&self, source: &[Token], max_len: usize, mode: DecodeMode) -> Result<Vec<Token>> {
        if source.is_empty() {
            return Err(Error::Input("cannot predict from an empty source".into()));
        }
        if max_len == 0 {
            return Ok(Vec::new());
        }
        let enc = self.encode(
            std::slice::from_ref(&source.to_vec()),
            &[vec![1.0; source.len()]],
        )?;

        let proj = self.config().attention.then(|| {
            EncProjection::build(
                self.params(),
                self.handles().attention.as_ref().unwrap(),
                &enc.top_states,
            )
        });
        match mode {
            DecodeMode::Greedy => self.greedy(&enc, proj.as_ref(), max_len),
            DecodeMode::Beam(width) => {
                if width == 0 {
                    return Err(Error::Input("beam width must be >= 1".into()));
                }
                self.beam(&enc, proj.as_ref(), max_len, width)
            }
        }
    }

    /// The top-layer final encoder state of `seq`: the semantic vector.
    pub fn encode_semantic(&self, seq: &[Token]) -> Result<Vec<f64>> {
        if seq.is_empty() {
            return Err(Error::Input("cannot encode an empty sequence".into()));
        }
        let enc = self.encode(
            std::slice::from_ref(&seq.to_vec()),
            &[vec![1.0; seq.len()]],
        )?;
        Ok(enc.context().row(0).to_vec())
    }

    fn greedy(
        &self,
        enc: &EncoderOutput,
        proj: Option<&EncProjection>,
        max_len: usize,
    ) -> Result<Vec<Token>> {
        let mut hidden = enc.finals.clone();
        let mut prev = BOS;
        let mut out = Vec::new();
        for _ in 0..max_len {
            let (log_probs, next_hidden) = self.decode_step(enc, proj, &hidden, prev)?;
            let best = argmax(&log_probs);
            hidden = next_hidden;
            if best as Token == EOS {
                break;
            }
            out.push(best as Token);
            prev = best as Token;
        }
        Ok(out)
    }

    fn beam(
        &self,
        enc: &EncoderOutput,
        proj: Option<&EncProjection>,
        max_len: usize,
        width: usize,
    ) -> Result<Vec<Token>> {
        let mut beam = vec![Hypothesis {
            tokens: Vec::new(),
            score: 0.0,
            emitted: 0,
            hidden: enc.finals.clone(),
            ended: false,
        }];

        for _ in 0..max_len {
            if beam.iter().all(|h| h.ended) {
                break;
            }
            let mut pool: Vec<Hypothesis> = Vec::new();
            for hyp in &beam {
                if hyp.ended {
                    pool.push(hyp.clone());
                    continue;
                }
                let prev = *hyp.tokens.last().unwrap_or(&BOS);
                let (log_probs, next_hidden) = self.decode_step(enc, proj, &hyp.hidden, prev)?;
                // Only the `width` best continuations of one hypothesis can
                // survive the cut.
                let mut order: Vec<usize> = (0..log_probs.len()).collect();
                order.sort_by(|&a, &b| {
                    log_probs[b].partial_cmp(&log_probs[a]).unwrap().then(a.cmp(&b))
                });
                for &tok in order.iter().take(width) {
                    let mut cand = hyp.clone();
                    cand.score += log_probs[tok];
                    cand.emitted += 1;
                    cand.hidden = next_hidden.clone();
                    if tok as Token == EOS {
                        cand.ended = true;
                    } else {
                        cand.tokens.push(tok as Token);
                    }
                    pool.push(cand);
                }
            }
            pool.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap()
                    .then_with(|| a.tokens.cmp(&b.tokens))
            });
            pool.truncate(width);
            beam = pool;
        }

        // Length-normalized final selection.
        beam.sort_by(|a, b| {
            let na = a.score / a.emitted.max(1) as f64;
            let nb = b.score / b.emitted.max(1) as f64;
            nb.partial_cmp(&na).unwrap().then_with(|| a.tokens.cmp(&b.tokens))
        });
        Ok(beam.into_iter().next().map(|h| h.tokens).unwrap_or_default())
    }

    /// One decode step for a single-row batch: returns the log-probability
    /// of every vocabulary token and the updated hidden stack.
    fn decode_step(
        &self,
        enc: &EncoderOutput,
        proj: Option<&EncProjection>,
        hidden: &[Matrix],
        prev: Token,
    ) -> Result<(Vec<f64>, Vec<Matrix>)> {
        let layers = self.config().layers;
        let handles = self.handles();
        let params = self.params();

        let context = if let Some(proj) = proj {
            let slots = handles.attention.as_ref().unwrap();
            let (state, _) =
                attention_forward(params, slots, &hidden[layers - 1], proj, &enc.source_mask);
            state.context
        } else {
            enc.context().clone()
        };

        let emb = self.embed(&[prev])?;
        let mut input = emb.concat_cols(&context);
        let mut next_hidden = Vec::with_capacity(layers);
        for layer in 0..layers {
            let (mut h_new, _) =
                cell_forward(params, &handles.decoder[layer], &input, &hidden[layer]);
            if layer > 0 {
                h_new.add_assign(&input);
            }
            input = h_new.clone();
            next_hidden.push(h_new);
        }

        let proj_in = if self.config().attention {
            next_hidden[layers - 1].concat_cols(&context)
        } else {
            next_hidden[layers - 1].clone()
        };
        let mut logits = proj_in.matmul(params.value(handles.out_w))?;
        logits.add_row_broadcast(params.value(handles.out_b));

        let row = logits.row(0);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = row.iter().map(|&l| l - max - log_sum).collect();
        Ok((log_probs, next_hidden))
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
