use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// H×W complex image-space array, the reconstruction target.
///
/// Dimensions are powers of two and at least 8 so that U-Net pooling and
/// dyadic wavelet levels always divide evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    data: Array2<Complex64>,
}

impl ComplexImage {
    pub fn new(data: Array2<Complex64>) -> Result<Self> {
        let (h, w) = data.dim();
        if h < 8 || w < 8 || !is_pow2(h) || !is_pow2(w) {
            return Err(Error::dim(format!(
                "image dims must be powers of two >= 8, got {h}x{w}"
            )));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("image contains NaN/Inf".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(h: usize, w: usize) -> Result<Self> {
        Self::new(Array2::zeros((h, w)))
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    /// Pixelwise magnitude image, used for metrics and percentile scaling.
    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { data: self.data.mapv(|v| v * s) }
    }
}

/// C×H×W coil sensitivity maps, sum-of-squares normalized so
/// `sum_c |S_c|^2 = 1` at every pixel.
#[derive(Debug, Clone)]
pub struct CoilSensitivities {
    data: Array3<Complex64>,
}

impl CoilSensitivities {
    pub fn new(data: Array3<Complex64>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c == 0 {
            return Err(Error::dim("need at least one coil"));
        }
        for y in 0..h {
            for x in 0..w {
                let sos: f64 = (0..c).map(|ci| data[[ci, y, x]].norm_sqr()).sum();
                if (sos - 1.0).abs() > 1e-6 {
                    return Err(Error::Numerical(format!(
                        "sensitivities not SOS-normalized at ({y},{x}): sum |S|^2 = {sos}"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn ncoils(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }
}

/// H×W binary undersampling mask with a fully sampled centered calibration
/// square and a target acceleration factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    data: Array2<u8>,
    acceleration: f64,
    calib_size: usize,
}

impl SamplingMask {
    /// Validates the two mask invariants: the calibration block is entirely
    /// sampled and the empirical acceleration is within ±10% of the target.
    pub fn new(data: Array2<u8>, acceleration: f64, calib_size: usize) -> Result<Self> {
        let (h, w) = data.dim();
        if calib_size > h.min(w) {
            return Err(Error::config(format!(
                "calibration size {calib_size} exceeds mask dims {h}x{w}"
            )));
        }
        let (y0, x0) = ((h - calib_size) / 2, (w - calib_size) / 2);
        for y in y0..y0 + calib_size {
            for x in x0..x0 + calib_size {
                if data[[y, x]] == 0 {
                    return Err(Error::Numerical("calibration block not fully sampled".into()));
                }
            }
        }
        let ones = data.iter().filter(|&&v| v != 0).count();
        if ones == 0 {
            return Err(Error::Degenerate("mask has no sampled locations".into()));
        }
        let empirical = (h * w) as f64 / ones as f64;
        if (empirical - acceleration).abs() > 0.1 * acceleration {
            return Err(Error::Numerical(format!(
                "empirical acceleration {empirical:.3} not within 10% of target {acceleration}"
            )));
        }
        Ok(Self { data, acceleration, calib_size })
    }

    /// Build a mask from a raw binary array, taking the empirical
    /// acceleration as the target. Handy for randomized property tests.
    pub fn from_binary(data: Array2<u8>) -> Result<Self> {
        let (h, w) = data.dim();
        let ones = data.iter().filter(|&&v| v != 0).count();
        if ones == 0 {
            return Err(Error::Degenerate("mask has no sampled locations".into()));
        }
        let accel = (h * w) as f64 / ones as f64;
        Self::new(data, accel, 0)
    }

    pub fn data(&self) -> &Array2<u8> {
        &self.data
    }

    pub fn acceleration(&self) -> f64 {
        self.acceleration
    }

    pub fn calib_size(&self) -> usize {
        self.calib_size
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn empirical_acceleration(&self) -> f64 {
        (self.height() * self.width()) as f64 / self.ones() as f64
    }

    pub fn is_sampled(&self, y: usize, x: usize) -> bool {
        self.data[[y, x]] != 0
    }
}

/// C×H×W multi-coil k-space measurements plus the mask they were acquired
/// with. Entries at mask-zero locations are exactly zero.
#[derive(Debug, Clone)]
pub struct KSpace {
    data: Array3<Complex64>,
    mask: SamplingMask,
}

impl KSpace {
    pub fn new(data: Array3<Complex64>, mask: SamplingMask) -> Result<Self> {
        let (_, h, w) = data.dim();
        if (h, w) != (mask.height(), mask.width()) {
            return Err(Error::dim(format!(
                "k-space dims {h}x{w} do not match mask {}x{}",
                mask.height(),
                mask.width()
            )));
        }
        for c in 0..data.dim().0 {
            for y in 0..h {
                for x in 0..w {
                    if !mask.is_sampled(y, x) && data[[c, y, x]] != Complex64::ZERO {
                        return Err(Error::Numerical(format!(
                            "nonzero k-space outside the mask at coil {c}, ({y},{x})"
                        )));
                    }
                }
            }
        }
        Ok(Self { data, mask })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn ncoils(&self) -> usize {
        self.data.dim().0
    }
}

/// Relative noise level and the seed of its generator stream.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

/// 95th percentile of a magnitude sample, by linear interpolation between
/// order statistics: rank `0.95 * (n - 1)` in the ascending sort.
pub fn percentile95(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::degenerate("percentile of empty sample"));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("magnitudes are finite"));
    let rank = 0.95 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let v = if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    };
    Ok(v)
}

/// Normalize an image by the 95th percentile of its magnitude.
///
/// Returns the normalized image and the scale; multiplying the output by the
/// scale recovers the input exactly.
pub fn normalize_p95(x: &ComplexImage) -> Result<(ComplexImage, f64)> {
    let mags: Vec<f64> = x.data().iter().map(|v| v.norm()).collect();
    let scale = percentile95(&mags)?;
    if scale == 0.0 {
        return Err(Error::degenerate("cannot p95-normalize an all-zero image"));
    }
    let out = ComplexImage::new(x.data().mapv(|v| v / scale))?;
    Ok((out, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn image_requires_pow2_dims() {
        assert!(ComplexImage::new(Array2::zeros((12, 16))).is_err());
        assert!(ComplexImage::new(Array2::zeros((4, 4))).is_err());
        assert!(ComplexImage::new(Array2::zeros((16, 32))).is_ok());
    }

    #[test]
    fn p95_of_1_to_100_interpolates() {
        // 95th percentile of {1..100} with the interpolated order statistic.
        let vals: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let p = percentile95(&vals).unwrap();
        assert!((p - 95.05).abs() < 1e-12, "p95 = {p}");
    }

    #[test]
    fn normalize_p95_roundtrip_and_homogeneity() {
        let mut a = Array2::zeros((8, 8));
        for (i, v) in a.iter_mut().enumerate() {
            *v = Complex64::new(1.0 + i as f64, -0.5 * i as f64);
        }
        let img = ComplexImage::new(a).unwrap();
        let (n1, s1) = normalize_p95(&img).unwrap();
        // Scaling back recovers the input exactly.
        let back = n1.scale(s1);
        for (u, v) in back.data().iter().zip(img.data().iter()) {
            assert!((u - v).norm() < 1e-12);
        }
        // Idempotence: a p95-normalized image has scale 1.
        let (n2, s2) = normalize_p95(&n1).unwrap();
        assert!((s2 - 1.0).abs() < 1e-12);
        assert_eq!(n1.data(), n2.data());
        // Homogeneity: scaling the input by 7 multiplies the scale by 7.
        let (n7, s7) = normalize_p95(&img.scale(7.0)).unwrap();
        assert!((s7 - 7.0 * s1).abs() < 1e-9 * s1);
        for (u, v) in n7.data().iter().zip(n1.data().iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_p95_rejects_zero_image() {
        let img = ComplexImage::zeros(8, 8).unwrap();
        assert!(matches!(normalize_p95(&img), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mask_invariants_enforced() {
        // A half-sampled mask with a hole in the calibration block fails.
        let mut data = Array2::<u8>::zeros((16, 16));
        for y in 0..16 {
            for x in 0..16 {
                data[[y, x]] = ((y + x) % 2) as u8;
            }
        }
        assert!(SamplingMask::new(data.clone(), 2.0, 4).is_err());
        for y in 6..10 {
            for x in 6..10 {
                data[[y, x]] = 1;
            }
        }
        let m = SamplingMask::new(data.clone(), 1.9, 4).unwrap();
        assert_eq!(m.calib_size(), 4);
        // Acceleration more than 10% off the empirical value fails.
        assert!(SamplingMask::new(data, 4.0, 4).is_err());
    }
}
