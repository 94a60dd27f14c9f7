//! Multi-coil acquisition model.
//!
//! The measurement model is `y_c = mask .* F(S_c .* x)` per coil `c`, with a
//! centered orthonormal 2D DFT `F`, sum-of-squares-normalized sensitivities
//! `S`, and a binary undersampling mask. [`adjoint_sense`] is the exact
//! adjoint of [`forward_model`], which makes the zero-filled SENSE input
//! `A^H y` and all gradient-based solvers well-posed.
//!
//! All generators in this module are pure functions of their parameters and
//! an explicit seed: repeat calls are bit-identical.

mod fft;
mod model;
mod sampling;
mod synth;
mod types;

pub use fft::{fft2c, fft2c_array, ifft2c, ifft2c_array};
pub use model::{add_masked_noise, adjoint_sense, forward_model};
pub use sampling::{all_ones_mask, make_poisson_disc_mask};
pub use synth::{make_coil_sensitivities, make_phantom};
pub use types::{
    normalize_p95, percentile95, CoilSensitivities, ComplexImage, KSpace, NoiseSpec, SamplingMask,
};
