//! Centered orthonormal 2D DFT.
//!
//! `fft2c` computes `shift(FFT2(shift(x))) / sqrt(H*W)` with both domains
//! centered, so the DC bin sits at `(H/2, W/2)` and the transform is unitary:
//! `ifft2c(fft2c(x)) == x` and energy is preserved.

use std::cell::RefCell;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::kspace::types::ComplexImage;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Circularly shift by half along both axes. For even dims this is its own
/// inverse, so the same helper serves as fftshift and ifftshift.
fn shift2(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = a.dim();
    let (hy, hx) = (h / 2, w / 2);
    Array2::from_shape_fn((h, w), |(y, x)| a[[(y + hy) % h, (x + hx) % w]])
}

fn fft2_inplace(a: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = a.dim();
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let row_fft = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
        let col_fft = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
        for mut row in a.rows_mut() {
            row_fft.process(row.as_slice_mut().expect("rows of a standard-layout array"));
        }
        let mut col = vec![Complex64::ZERO; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = a[[y, x]];
            }
            col_fft.process(&mut col);
            for y in 0..h {
                a[[y, x]] = col[y];
            }
        }
    });
}

fn centered(a: &Array2<Complex64>, inverse: bool) -> Result<Array2<Complex64>> {
    let (h, w) = a.dim();
    if !is_pow2(h) || !is_pow2(w) {
        return Err(Error::dim(format!("fft2c requires power-of-two dims, got {h}x{w}")));
    }
    let mut work = shift2(a);
    fft2_inplace(&mut work, inverse);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = shift2(&work);
    out.mapv_inplace(|v| v * scale);
    Ok(out)
}

/// Centered orthonormal forward 2D DFT on a raw array.
pub fn fft2c_array(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    centered(a, false)
}

/// Centered orthonormal inverse 2D DFT on a raw array.
pub fn ifft2c_array(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    centered(a, true)
}

pub fn fft2c(x: &ComplexImage) -> ComplexImage {
    // Image invariants guarantee power-of-two dims.
    ComplexImage::new(fft2c_array(x.data()).expect("image dims are powers of two"))
        .expect("unitary transform preserves finiteness")
}

pub fn ifft2c(x: &ComplexImage) -> ComplexImage {
    ComplexImage::new(ifft2c_array(x.data()).expect("image dims are powers of two"))
        .expect("unitary transform preserves finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn dc_of_constant_image() {
        // All-ones 8x8: every centered bin is zero except DC = N * mean / sqrt(N) = 8.
        let ones = Array2::from_elem((8, 8), Complex64::new(1.0, 0.0));
        let k = fft2c_array(&ones).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let expect = if (y, x) == (4, 4) { 8.0 } else { 0.0 };
                assert!((k[[y, x]].norm() - expect).abs() < 1e-12, "bin ({y},{x})");
            }
        }
    }

    #[test]
    fn centered_delta_has_flat_spectrum() {
        let mut d = Array2::from_elem((8, 8), Complex64::ZERO);
        d[[4, 4]] = Complex64::new(1.0, 0.0);
        let k = fft2c_array(&d).unwrap();
        for v in k.iter() {
            assert!((v.norm() - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_pow2() {
        let a = Array2::<Complex64>::zeros((12, 16));
        assert!(matches!(fft2c_array(&a), Err(crate::error::Error::Dim(_))));
    }
}
