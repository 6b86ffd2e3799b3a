use std::collections::HashMap;

use super::matrix::Matrix;
use super::rng::Rng;

/// Stable handle to one parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Slot {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

/// Named trainable tensors, each paired with a gradient buffer of the same
/// shape. Iteration follows insertion order, which fixes checkpoint layout
/// and makes gradient sweeps reproducible.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Registers a slot initialized to the given value. Panics on duplicate
    /// names: slot names identify tensors in checkpoints.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> SlotId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter slot {name:?}"
        );
        let grad = Matrix::zeros(value.rows(), value.cols());
        let id = SlotId(self.slots.len());
        self.index.insert(name.clone(), id.0);
        self.slots.push(Slot { name, value, grad });
        id
    }

    /// Registers a slot with entries drawn uniformly from (-range, range).
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        range: f64,
        rng: &mut Rng,
    ) -> SlotId {
        let value = Matrix::from_fn(rows, cols, |_, _| rng.uniform(-range, range));
        self.add(name, value)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<SlotId> {
        self.index.get(name).copied().map(SlotId)
    }

    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id.0]
    }

    pub fn value(&self, id: SlotId) -> &Matrix {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: SlotId) -> &mut Matrix {
        &mut self.slots[id.0].value
    }

    pub fn grad(&self, id: SlotId) -> &Matrix {
        &self.slots[id.0].grad
    }

    pub fn grad_mut(&mut self, id: SlotId) -> &mut Matrix {
        &mut self.slots[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = &Slot> {
        self.slots.iter()
    }

    /// Slot handles in insertion order.
    pub fn ids(&self) -> impl Iterator<Item = SlotId> {
        (0..self.slots.len()).map(SlotId)
    }

    pub fn zero_grads(&mut self) {
        for slot in &mut self.slots {
            slot.grad.data_mut().fill(0.0);
        }
    }

    pub fn total_values(&self) -> usize {
        self.slots.iter().map(|s| s.value.data().len()).sum()
    }

    /// Global L2 norm over all gradient buffers.
    pub fn grad_norm(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| s.grad.frobenius_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// Plain SGD update: value -= lr * grad, per slot.
    pub fn sgd_step(&mut self, lr: f64) {
        for slot in &mut self.slots {
            let grad = slot.grad.clone();
            slot.value.add_scaled(-lr, &grad);
        }
    }

    /// Copies values (not grads) for best-checkpoint bookkeeping.
    pub fn snapshot_values(&self) -> Vec<Matrix> {
        self.slots.iter().map(|s| s.value.clone()).collect()
    }

    pub fn restore_values(&mut self, snapshot: &[Matrix]) {
        assert_eq!(snapshot.len(), self.slots.len(), "snapshot slot count mismatch");
        for (slot, value) in self.slots.iter_mut().zip(snapshot) {
            assert_eq!(slot.value.shape(), value.shape(), "snapshot shape mismatch");
            slot.value = value.clone();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slots.iter().all(|s| s.value.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_keep_insertion_order() {
        let mut store = ParamStore::new();
        store.add("b", Matrix::zeros(1, 1));
        store.add("a", Matrix::zeros(2, 2));
        store.add("c", Matrix::zeros(1, 3));
        let names: Vec<&str> = store.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["b", "a", "c"]);
    }

    #[test]
    fn grad_shapes_match_values() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::zeros(3, 4));
        assert_eq!(store.grad(id).shape(), (3, 4));
    }

    #[test]
    #[should_panic(expected = "duplicate parameter slot")]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        store.add("w", Matrix::zeros(1, 1));
        store.add("w", Matrix::zeros(1, 1));
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::from_vec(1, 2, vec![1.0, -1.0]));
        store.grad_mut(id).data_mut().copy_from_slice(&[0.5, 0.5]);
        store.sgd_step(0.1);
        assert_eq!(store.value(id).data(), &[0.95, -1.05]);
    }

    #[test]
    fn uniform_init_within_range() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(9);
        let id = store.add_uniform("w", 10, 10, 0.08, &mut rng);
        assert!(store.value(id).data().iter().all(|v| v.abs() < 0.08));
        // Not degenerate: some spread.
        let distinct: std::collections::HashSet<u64> =
            store.value(id).data().iter().map(|v| v.to_bits()).collect();
        assert!(distinct.len() > 50);
    }
}
