//! Dense f64 matrix arithmetic, parameter storage with paired gradient
//! buffers, a seeded deterministic RNG, and a finite-difference gradient
//! oracle. Everything else in the crate computes on this substrate.

mod gradcheck;
mod matrix;
mod params;
mod rng;

pub use gradcheck::{grad_check, grad_check_coords};
pub use matrix::{elementwise, softmax_rows, Activation, Matrix};
pub(crate) use matrix::sigmoid_scalar;
pub use params::{ParamStore, Slot, SlotId};
pub use rng::Rng;
