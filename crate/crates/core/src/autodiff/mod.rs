//! Dense `f64` tensors with a recording tape for reverse-mode
//! differentiation.
//!
//! Parameters live in a [`ParamSet`] that tapes borrow read-only, so several
//! conversations can run forward/backward on separate tapes at once. Each
//! backward pass accumulates into a caller-owned [`Gradients`] buffer; merge
//! buffers with [`Gradients::add_assign`] before the optimizer step.

mod gradcheck;
mod optim;
mod params;
mod primitives;
pub mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Gradients, ParamId, ParamSet};
pub use primitives::check_primitives;
pub use tape::{BackwardFn, Tape, Var};
pub use tensor::Tensor;
