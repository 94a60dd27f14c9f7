//! Desk-scale accelerated-MRI reconstruction laboratory.
//!
//! The crate covers the full experimental loop for semi-supervised joint
//! reconstruction/denoising studies on synthetic multi-coil data:
//!
//! - [`kspace`]: acquisition forward model, Poisson-disc undersampling,
//!   synthetic coil maps and phantoms, noise injection, zero-filled SENSE.
//! - [`wavelet`] / [`cs`]: orthonormal DWT and the l1-wavelet proximal
//!   gradient baseline.
//! - [`autodiff`] / [`nn`] / [`optim`]: a reverse-mode tape over dense real
//!   tensors, the miniature U-Net, and Adam.
//! - [`training`]: losses, balanced sampling, and the four training methods
//!   (supervised, supervised+aug, denoiser pretrain/fine-tune, noise2recon).
//! - [`metrics`]: pSNR / nRMSE / SSIM on magnitude images plus aggregation.
//! - [`dataset`], [`sweep`], [`report`]: experiment harness building blocks.
//! - [`tensor_io`]: the N2RT binary tensor container used for all artifacts.

pub mod autodiff;
pub mod checkpoint;
pub mod cs;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod kspace;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod tensor_io;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
