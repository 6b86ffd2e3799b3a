use crate::error::{Error, Result};

use super::params::ParamStore;

/// Compares analytic gradients against central finite differences.
///
/// The caller must have populated `params` gradient buffers with the
/// analytic gradient of `loss_fn` at the current values (the loss function
/// itself must not touch gradients and must be deterministic: dropout off,
/// fixed data). Every coordinate of every slot is perturbed by +-epsilon
/// and the worst relative deviation is returned:
///
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
pub fn grad_check<F>(loss_fn: F, params: &mut ParamStore, epsilon: f64) -> Result<f64>
where
    F: FnMut(&ParamStore) -> f64,
{
    let per_coord = grad_check_coords(loss_fn, params, epsilon)?;
    Ok(per_coord.iter().flatten().fold(0.0, |m, &r| m.max(r)))
}

/// As [`grad_check`], but returns the relative deviation of every single
/// coordinate, one vector per slot in store order.
pub fn grad_check_coords<F>(
    mut loss_fn: F,
    params: &mut ParamStore,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&ParamStore) -> f64,
{
    let base = loss_fn(params);
    if !base.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite at base point: {base}")));
    }

    let mut out = Vec::with_capacity(params.len());
    let n_slots = params.len();
    for slot_idx in 0..n_slots {
        let id = super::params::SlotId(slot_idx);
        let coords = params.value(id).data().len();
        let mut rels = Vec::with_capacity(coords);
        for c in 0..coords {
            let analytic = params.grad(id).data()[c];
            let original = params.value(id).data()[c];

            params.value_mut(id).data_mut()[c] = original + epsilon;
            let loss_plus = loss_fn(params);
            params.value_mut(id).data_mut()[c] = original - epsilon;
            let loss_minus = loss_fn(params);
            params.value_mut(id).data_mut()[c] = original;

            if !loss_plus.is_finite() || !loss_minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss became non-finite while perturbing {}[{}]",
                    params.slot(id).name, c
                )));
            }

            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            rels.push((analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8));
        }
        out.push(rels);
    }
    Ok(out)
}
