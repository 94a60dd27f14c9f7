//! Reverse-mode automatic differentiation over dense real tensors.
//!
//! A [`Tape`] records one forward pass; [`Tape::backward`] walks it in
//! reverse and accumulates gradients additively, so using a tensor twice
//! yields the sum of per-use gradients. Tapes are per-forward-pass and never
//! shared across threads.
//!
//! The op set is exactly what the miniature U-Net and the training losses
//! need: 3x3/1x1 convolution, 2x2 transposed convolution, instance norm,
//! leaky ReLU, 2x2 average pooling, channel concatenation, elementwise
//! add/mul/scale, and the complex-l1 loss on 2-channel tensors.
//!
//! Everything is generic over [`Scalar`] (`f32` for training, `f64` for
//! finite-difference gradient checks, whose tolerances are unreachable in
//! single precision).

mod ops;
mod tape;

pub use tape::{Scalar, Tape, Var};
