//! Orthonormal multilevel 2D Daubechies-4 wavelet transform with periodic
//! boundary handling, plus complex soft-thresholding.
//!
//! The transform is unitary, so `norm(coeffs) == norm(image)` and
//! `idwt2(dwt2(x)) == x` to machine precision; that makes the l1 proximal
//! step in the CS solver exact.

use ndarray::{s, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kspace::ComplexImage;

/// Daubechies-4 analysis low-pass taps.
const SQRT3: f64 = 1.732050807568877293527446341505872367_f64;
const H: [f64; 4] = [
    (1.0 + SQRT3) / (4.0 * std::f64::consts::SQRT_2),
    (3.0 + SQRT3) / (4.0 * std::f64::consts::SQRT_2),
    (3.0 - SQRT3) / (4.0 * std::f64::consts::SQRT_2),
    (1.0 - SQRT3) / (4.0 * std::f64::consts::SQRT_2),
];

/// High-pass taps: g[n] = (-1)^n h[3-n].
const G: [f64; 4] = [H[3], -H[2], H[1], -H[0]];

/// Multilevel coefficients in the standard 2D layout: at each level the
/// top-left quadrant holds the approximation, which the next level splits.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    data: Array2<Complex64>,
    levels: usize,
}

impl WaveletCoeffs {
    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Sum of complex coefficient magnitudes.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).sum()
    }
}

fn check_levels(h: usize, w: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::dim("wavelet levels must be >= 1"));
    }
    let div = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::dim("too many wavelet levels"))?;
    if h % div != 0 || w % div != 0 || h / div == 0 || w / div == 0 {
        return Err(Error::dim(format!(
            "dims {h}x{w} not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Periodic analysis of one length-n lane: first half approximation,
/// second half detail.
fn analyze_lane(lane: &[Complex64], out: &mut [Complex64]) {
    let n = lane.len();
    let half = n / 2;
    for k in 0..half {
        let mut a = Complex64::ZERO;
        let mut d = Complex64::ZERO;
        for (t, (&hc, &gc)) in H.iter().zip(G.iter()).enumerate() {
            let v = lane[(2 * k + t) % n];
            a += v * hc;
            d += v * gc;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

/// Periodic synthesis, inverse of [`analyze_lane`].
fn synthesize_lane(coeff: &[Complex64], out: &mut [Complex64]) {
    let n = coeff.len();
    let half = n / 2;
    for v in out.iter_mut() {
        *v = Complex64::ZERO;
    }
    for k in 0..half {
        let a = coeff[k];
        let d = coeff[half + k];
        for (t, (&hc, &gc)) in H.iter().zip(G.iter()).enumerate() {
            let m = (2 * k + t) % n;
            out[m] += a * hc + d * gc;
        }
    }
}

fn transform_block(block: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = block.dim();
    let mut buf_in: Vec<Complex64> = Vec::new();
    let mut buf_out = vec![Complex64::ZERO; h.max(w)];
    if !inverse {
        for y in 0..h {
            buf_in.clear();
            buf_in.extend(block.row(y).iter().copied());
            analyze_lane(&buf_in, &mut buf_out[..w]);
            for x in 0..w {
                block[[y, x]] = buf_out[x];
            }
        }
        for x in 0..w {
            buf_in.clear();
            buf_in.extend(block.column(x).iter().copied());
            analyze_lane(&buf_in, &mut buf_out[..h]);
            for y in 0..h {
                block[[y, x]] = buf_out[y];
            }
        }
    } else {
        for x in 0..w {
            buf_in.clear();
            buf_in.extend(block.column(x).iter().copied());
            synthesize_lane(&buf_in, &mut buf_out[..h]);
            for y in 0..h {
                block[[y, x]] = buf_out[y];
            }
        }
        for y in 0..h {
            buf_in.clear();
            buf_in.extend(block.row(y).iter().copied());
            synthesize_lane(&buf_in, &mut buf_out[..w]);
            for x in 0..w {
                block[[y, x]] = buf_out[x];
            }
        }
    }
}

pub fn dwt2_array(x: &Array2<Complex64>, levels: usize) -> Result<Array2<Complex64>> {
    let (h, w) = x.dim();
    check_levels(h, w, levels)?;
    let mut data = x.clone();
    for lv in 0..levels {
        let (bh, bw) = (h >> lv, w >> lv);
        let mut block = data.slice(s![..bh, ..bw]).to_owned();
        transform_block(&mut block, false);
        data.slice_mut(s![..bh, ..bw]).assign(&block);
    }
    Ok(data)
}

pub fn idwt2_array(coeffs: &Array2<Complex64>, levels: usize) -> Result<Array2<Complex64>> {
    let (h, w) = coeffs.dim();
    check_levels(h, w, levels)?;
    let mut data = coeffs.clone();
    for lv in (0..levels).rev() {
        let (bh, bw) = (h >> lv, w >> lv);
        let mut block = data.slice(s![..bh, ..bw]).to_owned();
        transform_block(&mut block, true);
        data.slice_mut(s![..bh, ..bw]).assign(&block);
    }
    Ok(data)
}

pub fn dwt2(x: &ComplexImage, levels: usize) -> Result<WaveletCoeffs> {
    Ok(WaveletCoeffs { data: dwt2_array(x.data(), levels)?, levels })
}

pub fn idwt2(coeffs: &WaveletCoeffs) -> Result<ComplexImage> {
    ComplexImage::new(idwt2_array(&coeffs.data, coeffs.levels)?)
}

/// Complex magnitude shrinkage: `z -> z * max(|z| - tau, 0) / |z|`, the
/// proximal operator of `tau * ||.||_1` on complex coefficients.
pub fn soft_threshold(coeffs: &WaveletCoeffs, tau: f64) -> WaveletCoeffs {
    let data = coeffs.data.mapv(|z| {
        let m = z.norm();
        if m <= tau || m == 0.0 {
            Complex64::ZERO
        } else {
            z * ((m - tau) / m)
        }
    });
    WaveletCoeffs { data, levels: coeffs.levels }
}

/// Largest level count this crate uses for dyadic dims: 4 where possible,
/// fewer on very small images so the coarsest band keeps >= 2 samples.
pub fn default_levels(h: usize, w: usize) -> usize {
    let max = (h.min(w) as f64).log2() as usize;
    max.saturating_sub(1).clamp(1, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::make_phantom;

    fn rand_image(h: usize, w: usize, seed: u64) -> Array2<Complex64> {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(seed);
        Array2::from_shape_fn((h, w), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn constant_image_has_zero_details() {
        let x = Array2::from_elem((64, 64), Complex64::new(0.7, -0.3));
        let c = dwt2_array(&x, 4).unwrap();
        // Energy concentrates in the coarsest 4x4 approximation block.
        for y in 0..64 {
            for xx in 0..64 {
                if y >= 4 || xx >= 4 {
                    assert!(c[[y, xx]].norm() < 1e-10, "detail at ({y},{xx})");
                }
            }
        }
        let energy_in: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let energy_coarse: f64 =
            (0..4).flat_map(|y| (0..4).map(move |xx| (y, xx))).map(|(y, xx)| c[[y, xx]].norm_sqr()).sum();
        assert!((energy_in - energy_coarse).abs() < 1e-8 * energy_in);
    }

    #[test]
    fn perfect_reconstruction() {
        let x = rand_image(64, 64, 3);
        let c = dwt2_array(&x, 4).unwrap();
        let back = idwt2_array(&c, 4).unwrap();
        let err = x.iter().zip(back.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "max reconstruction error {err}");
    }

    #[test]
    fn energy_preserved() {
        for levels in 1..=4 {
            let x = rand_image(32, 32, levels as u64);
            let c = dwt2_array(&x, levels).unwrap();
            let e_in: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let e_out: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((e_in - e_out).abs() < 1e-6 * e_in, "levels {levels}");
        }
    }

    #[test]
    fn divisibility_violation_errors() {
        let x = rand_image(8, 8, 1);
        assert!(matches!(dwt2_array(&x, 4), Err(Error::Dim(_))));
    }

    #[test]
    fn soft_threshold_examples() {
        let img = make_phantom(16, 16, 2).unwrap();
        let c = dwt2(&img, 2).unwrap();
        // tau = 0 is the identity.
        assert_eq!(soft_threshold(&c, 0.0).data(), c.data());
        // z = 3+4i, tau = 1: |z| = 5, shrink to 4 => (3+4i) * 4/5.
        let one = Array2::from_elem((8, 8), Complex64::new(3.0, 4.0));
        let wc = WaveletCoeffs { data: one, levels: 1 };
        let out = soft_threshold(&wc, 1.0);
        for v in out.data().iter() {
            assert!((v - Complex64::new(2.4, 3.2)).norm() < 1e-12);
        }
    }

    #[test]
    fn soft_threshold_is_the_l1_prox() {
        // Per coefficient, z -> argmin_u 0.5|u - z|^2 + tau|u|. The minimizer
        // is collinear with z, so grid-search the scalar magnitude.
        let tau = 0.3;
        let c = dwt2(&make_phantom(16, 16, 9).unwrap(), 2).unwrap();
        let out = soft_threshold(&c, tau);
        for (z, u) in c.data().iter().zip(out.data().iter()).step_by(7) {
            let mut best_t = 0.0;
            let mut best_cost = f64::INFINITY;
            let hi = z.norm() * 1.5 + 1e-3;
            for i in 0..20_000 {
                let t = hi * i as f64 / 19_999.0;
                let cost = 0.5 * (t - z.norm()).powi(2) + tau * t;
                if cost < best_cost {
                    best_cost = cost;
                    best_t = t;
                }
            }
            assert!((u.norm() - best_t).abs() < 1e-3, "|u| = {}, grid {best_t}", u.norm());
            if u.norm() > 0.0 {
                // Collinear with z.
                let dir = (u / z).im.abs();
                assert!(dir < 1e-9);
            }
        }
    }

    #[test]
    fn matches_dense_orthonormal_matrix_oracle() {
        // Single level on 8x8 equals A X A^T where A is the periodized
        // analysis matrix built independently from the filter taps.
        let n = 8;
        let mut a = Array2::<f64>::zeros((n, n));
        for k in 0..n / 2 {
            for (t, (&hc, &gc)) in H.iter().zip(G.iter()).enumerate() {
                a[[k, (2 * k + t) % n]] += hc;
                a[[n / 2 + k, (2 * k + t) % n]] += gc;
            }
        }
        // A is orthonormal.
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|m| a[[i, m]] * a[[j, m]]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        let x = rand_image(n, n, 42);
        let want = {
            // rows: X A^T, then cols: A (X A^T)
            let mut t1 = Array2::<Complex64>::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let mut s = Complex64::ZERO;
                    for m in 0..n {
                        s += x[[i, m]] * a[[j, m]];
                    }
                    t1[[i, j]] = s;
                }
            }
            let mut t2 = Array2::<Complex64>::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let mut s = Complex64::ZERO;
                    for m in 0..n {
                        s += t1[[m, j]] * a[[i, m]];
                    }
                    t2[[i, j]] = s;
                }
            }
            t2
        };
        let got = dwt2_array(&x, 1).unwrap();
        for (u, v) in got.iter().zip(want.iter()) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn default_levels_scale_with_size() {
        assert_eq!(default_levels(64, 64), 4);
        assert_eq!(default_levels(32, 32), 4);
        assert_eq!(default_levels(16, 16), 3);
        assert_eq!(default_levels(8, 8), 2);
    }
}
