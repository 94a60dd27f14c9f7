//! Acquisition forward model, its adjoint, and masked noise injection.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kspace::fft::{fft2c_array, ifft2c_array};
use crate::kspace::types::{
    percentile95, CoilSensitivities, ComplexImage, KSpace, NoiseSpec, SamplingMask,
};
use crate::rng::rng_from;

fn check_shapes(x: &ComplexImage, sens: &CoilSensitivities, mask: &SamplingMask) -> Result<()> {
    if (x.height(), x.width()) != (sens.height(), sens.width())
        || (x.height(), x.width()) != (mask.height(), mask.width())
    {
        return Err(Error::dim(format!(
            "shape mismatch: image {}x{}, sens {}x{}, mask {}x{}",
            x.height(),
            x.width(),
            sens.height(),
            sens.width(),
            mask.height(),
            mask.width()
        )));
    }
    Ok(())
}

/// Per coil c: `y_c = mask .* fft2c(S_c .* x)`, zeros outside the mask.
pub fn forward_model(
    x: &ComplexImage,
    sens: &CoilSensitivities,
    mask: &SamplingMask,
) -> Result<KSpace> {
    check_shapes(x, sens, mask)?;
    let (c, h, w) = sens.data().dim();
    let mut out = Array3::<Complex64>::zeros((c, h, w));
    let mut weighted = Array2::<Complex64>::zeros((h, w));
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                weighted[[y, xx]] = sens.data()[[ci, y, xx]] * x.data()[[y, xx]];
            }
        }
        let k = fft2c_array(&weighted)?;
        for y in 0..h {
            for xx in 0..w {
                if mask.is_sampled(y, xx) {
                    out[[ci, y, xx]] = k[[y, xx]];
                }
            }
        }
    }
    KSpace::new(out, mask.clone())
}

/// Zero-filled SENSE reconstruction: `x = sum_c conj(S_c) .* ifft2c(y_c)`.
///
/// This is the exact adjoint of [`forward_model`] restricted to the mask.
pub fn adjoint_sense(y: &KSpace, sens: &CoilSensitivities) -> Result<ComplexImage> {
    let (c, h, w) = y.data().dim();
    if (c, h, w) != sens.data().dim() {
        return Err(Error::dim(format!(
            "k-space {:?} does not match sensitivities {:?}",
            y.data().dim(),
            sens.data().dim()
        )));
    }
    let mut acc = Array2::<Complex64>::zeros((h, w));
    let mut coil = Array2::<Complex64>::zeros((h, w));
    for ci in 0..c {
        for yy in 0..h {
            for xx in 0..w {
                coil[[yy, xx]] = y.data()[[ci, yy, xx]];
            }
        }
        let img = ifft2c_array(&coil)?;
        for yy in 0..h {
            for xx in 0..w {
                acc[[yy, xx]] += sens.data()[[ci, yy, xx]].conj() * img[[yy, xx]];
            }
        }
    }
    ComplexImage::new(acc)
}

/// Add masked complex Gaussian noise to k-space.
///
/// Real and imaginary parts are i.i.d. `N(0, sigma^2)` per entry per coil,
/// scaled by the 95th percentile of `|scale_ref|` so sigma reads as a
/// relative SNR reduction. Locations outside the acquisition mask stay
/// exactly zero. Deterministic given the spec's seed.
pub fn add_masked_noise(y: &KSpace, spec: &NoiseSpec, scale_ref: &ComplexImage) -> Result<KSpace> {
    if spec.sigma == 0.0 {
        return Ok(y.clone());
    }
    let mags: Vec<f64> = scale_ref.data().iter().map(|v| v.norm()).collect();
    let p95 = percentile95(&mags)?;
    let std = spec.sigma * p95;
    let mut rng = rng_from(spec.seed);
    let (c, h, w) = y.data().dim();
    let mut out = y.data().clone();
    for ci in 0..c {
        for yy in 0..h {
            for xx in 0..w {
                if y.mask().is_sampled(yy, xx) {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    out[[ci, yy, xx]] += Complex64::new(std * re, std * im);
                }
            }
        }
    }
    KSpace::new(out, y.mask().clone())
}
