use crate::numeric::{sigmoid_scalar, Matrix, ParamStore, Rng, SlotId};

use super::INIT_RANGE;

/// Recurrent unit choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Gru,
    SimpleRnn,
}

impl CellKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellKind::Gru => "gru",
            CellKind::SimpleRnn => "simple_rnn",
        }
    }

    pub fn parse(s: &str) -> Option<CellKind> {
        match s {
            "gru" => Some(CellKind::Gru),
            "simple_rnn" => Some(CellKind::SimpleRnn),
            _ => None,
        }
    }
}

/// Parameter slots of one recurrent layer.
///
/// GRU convention (recorded in checkpoint headers):
///   z = sigm(x Wz + h Uz + bz)
///   r = sigm(x Wr + h Ur + br)
///   h~ = tanh(x Wh + (r * h) Uh + bh)
///   h' = (1 - z) * h + z * h~
///
/// The simple cell is h' = sigm(x Wx + h Wh + b).
#[derive(Debug, Clone)]
pub enum CellSlots {
    Gru {
        wz: SlotId,
        uz: SlotId,
        bz: SlotId,
        wr: SlotId,
        ur: SlotId,
        br: SlotId,
        wh: SlotId,
        uh: SlotId,
        bh: SlotId,
    },
    Rnn {
        wx: SlotId,
        wh: SlotId,
        b: SlotId,
    },
}

impl CellSlots {
    pub fn register(
        kind: CellKind,
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> CellSlots {
        let mut gate = |name: &str, rows: usize, cols: usize| {
            store.add_uniform(format!("{prefix}.{name}"), rows, cols, INIT_RANGE, rng)
        };
        match kind {
            CellKind::Gru => CellSlots::Gru {
                wz: gate("wz", input_dim, hidden),
                uz: gate("uz", hidden, hidden),
                bz: gate("bz", 1, hidden),
                wr: gate("wr", input_dim, hidden),
                ur: gate("ur", hidden, hidden),
                br: gate("br", 1, hidden),
                wh: gate("wh", input_dim, hidden),
                uh: gate("uh", hidden, hidden),
                bh: gate("bh", 1, hidden),
            },
            CellKind::SimpleRnn => CellSlots::Rnn {
                wx: gate("wx", input_dim, hidden),
                wh: gate("wh", hidden, hidden),
                b: gate("b", 1, hidden),
            },
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub enum StepCache {
    Gru {
        x: Matrix,
        h_prev: Matrix,
        z: Matrix,
        r: Matrix,
        h_tilde: Matrix,
        /// r * h_prev, the gated recurrent input to the candidate.
        rh: Matrix,
    },
    Rnn {
        x: Matrix,
        h_prev: Matrix,
        h_new: Matrix,
    },
}

/// One recurrence step: (new hidden, cache).
pub fn cell_forward(
    params: &ParamStore,
    slots: &CellSlots,
    x: &Matrix,
    h_prev: &Matrix,
) -> (Matrix, StepCache) {
    match slots {
        CellSlots::Gru { wz, uz, bz, wr, ur, br, wh, uh, bh } => {
            let mut z_pre = x.matmul(params.value(*wz)).unwrap();
            z_pre.add_assign(&h_prev.matmul(params.value(*uz)).unwrap());
            z_pre.add_row_broadcast(params.value(*bz));
            let z = z_pre.map(sigmoid_scalar);

            let mut r_pre = x.matmul(params.value(*wr)).unwrap();
            r_pre.add_assign(&h_prev.matmul(params.value(*ur)).unwrap());
            r_pre.add_row_broadcast(params.value(*br));
            let r = r_pre.map(sigmoid_scalar);

            let rh = r.hadamard(h_prev);
            let mut h_pre = x.matmul(params.value(*wh)).unwrap();
            h_pre.add_assign(&rh.matmul(params.value(*uh)).unwrap());
            h_pre.add_row_broadcast(params.value(*bh));
            let h_tilde = h_pre.map(f64::tanh);

            // h' = (1 - z) * h_prev + z * h_tilde
            let mut h_new = h_tilde.hadamard(&z);
            let keep = z.map(|v| 1.0 - v);
            h_new.add_assign(&h_prev.hadamard(&keep));

            let cache = StepCache::Gru {
                x: x.clone(),
                h_prev: h_prev.clone(),
                z,
                r,
                h_tilde,
                rh,
            };
            (h_new, cache)
        }
        CellSlots::Rnn { wx, wh, b } => {
            let mut pre = x.matmul(params.value(*wx)).unwrap();
            pre.add_assign(&h_prev.matmul(params.value(*wh)).unwrap());
            pre.add_row_broadcast(params.value(*b));
            let h_new = pre.map(sigmoid_scalar);
            let cache = StepCache::Rnn {
                x: x.clone(),
                h_prev: h_prev.clone(),
                h_new: h_new.clone(),
            };
            (h_new, cache)
        }
    }
}

/// Backward through one step. Accumulates parameter gradients into the
/// store and returns (d_input, d_hidden_prev).
pub fn cell_backward(
    params: &mut ParamStore,
    slots: &CellSlots,
    cache: &StepCache,
    dh_new: &Matrix,
) -> (Matrix, Matrix) {
    match (slots, cache) {
        (
            CellSlots::Gru { wz, uz, bz, wr, ur, br, wh, uh, bh },
            StepCache::Gru { x, h_prev, z, r, h_tilde, rh },
        ) => {
            // h' = (1-z) * h_prev + z * h~
            let dz = dh_new.hadamard(&h_tilde.sub(h_prev));
            let dh_tilde = dh_new.hadamard(z);
            let mut dh_prev = dh_new.hadamard(&z.map(|v| 1.0 - v));

            // Candidate branch.
            let da_h = dh_tilde.hadamard(&h_tilde.map(|v| 1.0 - v * v));
            params.grad_mut(*wh).add_assign(&x.matmul_at_b(&da_h).unwrap());
            params.grad_mut(*uh).add_assign(&rh.matmul_at_b(&da_h).unwrap());
            params.grad_mut(*bh).add_assign(&da_h.sum_rows());
            let mut dx = da_h.matmul_a_bt(params.value(*wh)).unwrap();
            let drh = da_h.matmul_a_bt(params.value(*uh)).unwrap();
            let dr = drh.hadamard(h_prev);
            dh_prev.add_assign(&drh.hadamard(r));

            // Update gate.
            let da_z = dz.hadamard(&z.hadamard(&z.map(|v| 1.0 - v)));
            params.grad_mut(*wz).add_assign(&x.matmul_at_b(&da_z).unwrap());
            params.grad_mut(*uz).add_assign(&h_prev.matmul_at_b(&da_z).unwrap());
            params.grad_mut(*bz).add_assign(&da_z.sum_rows());
            dx.add_assign(&da_z.matmul_a_bt(params.value(*wz)).unwrap());
            dh_prev.add_assign(&da_z.matmul_a_bt(params.value(*uz)).unwrap());

            // Reset gate.
            let da_r = dr.hadamard(&r.hadamard(&r.map(|v| 1.0 - v)));
            params.grad_mut(*wr).add_assign(&x.matmul_at_b(&da_r).unwrap());
            params.grad_mut(*ur).add_assign(&h_prev.matmul_at_b(&da_r).unwrap());
            params.grad_mut(*br).add_assign(&da_r.sum_rows());
            dx.add_assign(&da_r.matmul_a_bt(params.value(*wr)).unwrap());
            dh_prev.add_assign(&da_r.matmul_a_bt(params.value(*ur)).unwrap());

            (dx, dh_prev)
        }
        (CellSlots::Rnn { wx, wh, b }, StepCache::Rnn { x, h_prev, h_new }) => {
            let da = dh_new.hadamard(&h_new.hadamard(&h_new.map(|v| 1.0 - v)));
            params.grad_mut(*wx).add_assign(&x.matmul_at_b(&da).unwrap());
            params.grad_mut(*wh).add_assign(&h_prev.matmul_at_b(&da).unwrap());
            params.grad_mut(*b).add_assign(&da.sum_rows());
            let dx = da.matmul_a_bt(params.value(*wx)).unwrap();
            let dh_prev = da.matmul_a_bt(params.value(*wh)).unwrap();
            (dx, dh_prev)
        }
        _ => unreachable!("cache kind does not match slot kind"),
    }
}
