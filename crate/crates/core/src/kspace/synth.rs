//! Synthetic coil maps and phantoms.
//!
//! Coil maps are Gaussian magnitude lobes centered at equally spaced border
//! positions with linear phase ramps, pixelwise sum-of-squares normalized.
//! Phantoms are random ellipse superpositions: piecewise-constant magnitude
//! in [0, 1] (wavelet-sparse, so the CS baseline has something to recover)
//! under a smooth low-order polynomial phase.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::kspace::types::{CoilSensitivities, ComplexImage};
use crate::rng::rng_from;

/// Width of the Gaussian lobes relative to min(h, w).
const LOBE_SIGMA: f64 = 0.6;

pub fn make_coil_sensitivities(
    h: usize,
    w: usize,
    ncoils: usize,
    seed: u64,
) -> Result<CoilSensitivities> {
    let mut rng = rng_from(seed);
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let sigma = LOBE_SIGMA * h.min(w) as f64;
    let mut data = Array3::<Complex64>::zeros((ncoils, h, w));
    for c in 0..ncoils {
        let jitter: f64 = rng.random_range(-0.15..0.15);
        let theta = 2.0 * std::f64::consts::PI * (c as f64 + jitter) / ncoils as f64;
        let (yc, xc) = (cy + 0.45 * h as f64 * theta.sin(), cx + 0.45 * w as f64 * theta.cos());
        let ramp_y: f64 = rng.random_range(-0.5..0.5);
        let ramp_x: f64 = rng.random_range(-0.5..0.5);
        let phase0: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        for y in 0..h {
            for x in 0..w {
                let dy = y as f64 - yc;
                let dx = x as f64 - xc;
                let mag = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
                let phase = phase0
                    + 2.0
                        * std::f64::consts::PI
                        * (ramp_y * (y as f64 - cy) / h as f64
                            + ramp_x * (x as f64 - cx) / w as f64);
                data[[c, y, x]] = Complex64::from_polar(mag, phase);
            }
        }
    }
    // Pixelwise sum-of-squares normalization.
    for y in 0..h {
        for x in 0..w {
            let sos: f64 = (0..ncoils).map(|c| data[[c, y, x]].norm_sqr()).sum();
            let inv = 1.0 / sos.sqrt();
            for c in 0..ncoils {
                data[[c, y, x]] *= inv;
            }
        }
    }
    CoilSensitivities::new(data)
}

struct Ellipse {
    cy: f64,
    cx: f64,
    a: f64,
    b: f64,
    rot: f64,
    amp: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.rot.sin_cos();
        let dy = y - self.cy;
        let dx = x - self.cx;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

pub fn make_phantom(h: usize, w: usize, seed: u64) -> Result<ComplexImage> {
    let mut rng = rng_from(seed);
    let dim = h.min(w) as f64;
    let n_extra = rng.random_range(4..=14usize);
    let mut ellipses = Vec::with_capacity(n_extra + 1);
    // One large body ellipse, then smaller internal structures.
    ellipses.push(Ellipse {
        cy: h as f64 * rng.random_range(0.45..0.55),
        cx: w as f64 * rng.random_range(0.45..0.55),
        a: dim * rng.random_range(0.30..0.42),
        b: dim * rng.random_range(0.30..0.42),
        rot: rng.random_range(0.0..std::f64::consts::PI),
        amp: rng.random_range(0.4..0.7),
    });
    for _ in 0..n_extra {
        ellipses.push(Ellipse {
            cy: h as f64 * rng.random_range(0.2..0.8),
            cx: w as f64 * rng.random_range(0.2..0.8),
            a: dim * rng.random_range(0.05..0.25),
            b: dim * rng.random_range(0.05..0.25),
            rot: rng.random_range(0.0..std::f64::consts::PI),
            amp: rng.random_range(-0.4..0.5),
        });
    }
    let phase_coef: [f64; 5] = std::array::from_fn(|_| rng.random_range(-0.8..0.8));

    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let mut data = Array2::<Complex64>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut mag: f64 = 0.0;
            for e in &ellipses {
                if e.contains(y as f64, x as f64) {
                    mag += e.amp;
                }
            }
            mag = mag.clamp(0.0, 1.0);
            let u = (y as f64 - cy) / cy;
            let v = (x as f64 - cx) / cx;
            let phase = phase_coef[0] * u
                + phase_coef[1] * v
                + phase_coef[2] * u * u
                + phase_coef[3] * u * v
                + phase_coef[4] * v * v;
            data[[y, x]] = Complex64::from_polar(mag, phase);
        }
    }
    ComplexImage::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coil_has_unit_magnitude() {
        let s = make_coil_sensitivities(64, 64, 1, 0).unwrap();
        for v in s.data().iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sos_normalization_holds() {
        let s = make_coil_sensitivities(64, 64, 8, 0).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let sos: f64 = (0..8).map(|c| s.data()[[c, y, x]].norm_sqr()).sum();
                assert!((sos - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn maps_are_smooth() {
        let s = make_coil_sensitivities(64, 64, 4, 3).unwrap();
        for c in 0..4 {
            for y in 0..64 {
                for x in 0..64 {
                    let m = s.data()[[c, y, x]].norm();
                    if y + 1 < 64 {
                        assert!((m - s.data()[[c, y + 1, x]].norm()).abs() < 0.1);
                    }
                    if x + 1 < 64 {
                        assert!((m - s.data()[[c, y, x + 1]].norm()).abs() < 0.1);
                    }
                }
            }
        }
    }

    #[test]
    fn phantom_bounded_and_deterministic() {
        let a = make_phantom(64, 64, 0).unwrap();
        assert!(a.data().iter().all(|v| v.norm() <= 1.0 + 1e-9));
        let b = make_phantom(64, 64, 0).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn phantoms_differ_across_seeds() {
        let a = make_phantom(64, 64, 1).unwrap();
        let b = make_phantom(64, 64, 2).unwrap();
        let diff: f64 = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let norm: f64 = a.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm > 0.01, "relative difference {}", diff / norm);
    }
}
