//! Compressed-sensing baseline: proximal gradient (ISTA) on the l1-wavelet
//! objective `0.5 ||A x - y||^2 + lambda ||W x||_1`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kspace::{
    adjoint_sense, forward_model, CoilSensitivities, ComplexImage, KSpace,
};
use crate::rng::{mix, rng_from, stream};
use crate::wavelet::{default_levels, dwt2, idwt2, soft_threshold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// 1/L with L estimated by 20 power-iteration steps on A^H A.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct CsConfig {
    pub lambda: f64,
    pub iters: usize,
    pub step: StepRule,
}

impl CsConfig {
    pub fn new(lambda: f64, iters: usize, step: StepRule) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::config(format!("lambda must be >= 0, got {lambda}")));
        }
        if iters == 0 {
            return Err(Error::config("iteration count must be >= 1"));
        }
        if let StepRule::Fixed(t) = step {
            if !(t > 0.0) {
                return Err(Error::config(format!("step must be positive, got {t}")));
            }
        }
        Ok(Self { lambda, iters, step })
    }

    /// The clinical default: 25 proximal-gradient iterations, automatic step.
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, 25, StepRule::Auto)
    }
}

#[derive(Debug, Clone)]
pub struct CsResult {
    pub image: ComplexImage,
    /// Composite objective after init and after every iteration.
    pub objective: Vec<f64>,
}

const POWER_ITERS: usize = 20;

fn dot(a: &ComplexImage, b: &ComplexImage) -> Complex64 {
    a.data()
        .iter()
        .zip(b.data().iter())
        .map(|(u, v)| u * v.conj())
        .sum()
}

fn norm(a: &ComplexImage) -> f64 {
    a.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(x: &ComplexImage, alpha: f64, y: &ComplexImage) -> ComplexImage {
    let data = x
        .data()
        .iter()
        .zip(y.data().iter())
        .map(|(u, v)| u + v * alpha)
        .collect::<Vec<_>>();
    let arr = ndarray::Array2::from_shape_vec(x.data().dim(), data).expect("same shape");
    ComplexImage::new(arr).expect("finite arithmetic on finite inputs")
}

/// Largest eigenvalue of A^H A by power iteration from a fixed-seed start.
fn estimate_lipschitz(y: &KSpace, sens: &CoilSensitivities) -> Result<f64> {
    let (h, w) = (y.mask().height(), y.mask().width());
    let mut rng = rng_from(mix(0x6c69_7073, stream::POWER_ITER));
    let mut v = ComplexImage::new(ndarray::Array2::from_shape_fn((h, w), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }))?;
    let n = norm(&v);
    if n == 0.0 {
        return Err(Error::numerical("power iteration started from zero vector"));
    }
    v = v.scale(1.0 / n);
    let mut lmax: f64 = 0.0;
    for _ in 0..POWER_ITERS {
        let av = forward_model(&v, sens, y.mask())?;
        let ahav = adjoint_sense(&av, sens)?;
        let rayleigh = dot(&ahav, &v).re;
        lmax = lmax.max(rayleigh);
        let n = norm(&ahav);
        if n == 0.0 {
            break;
        }
        v = ahav.scale(1.0 / n);
    }
    if lmax <= 0.0 {
        return Err(Error::numerical("power iteration did not find a positive eigenvalue"));
    }
    Ok(lmax)
}

fn data_residual(x: &ComplexImage, y: &KSpace, sens: &CoilSensitivities) -> Result<KSpace> {
    let ax = forward_model(x, sens, y.mask())?;
    let data = ax.data() - y.data();
    KSpace::new(data, y.mask().clone())
}

fn objective(
    x: &ComplexImage,
    y: &KSpace,
    sens: &CoilSensitivities,
    lambda: f64,
    levels: usize,
) -> Result<f64> {
    let r = data_residual(x, y, sens)?;
    let fidelity: f64 = 0.5 * r.data().iter().map(|v| v.norm_sqr()).sum::<f64>();
    let l1 = dwt2(x, levels)?.l1_norm();
    Ok(fidelity + lambda * l1)
}

/// Proximal-gradient reconstruction:
/// `x <- idwt2(soft_threshold(dwt2(x - t A^H(Ax - y)), t * lambda))`
/// initialized at `x0 = A^H y`.
pub fn cs_reconstruct(y: &KSpace, sens: &CoilSensitivities, cfg: &CsConfig) -> Result<CsResult> {
    let levels = default_levels(y.mask().height(), y.mask().width());
    let step = match cfg.step {
        StepRule::Fixed(t) => t,
        StepRule::Auto => 1.0 / estimate_lipschitz(y, sens)?,
    };
    let mut x = adjoint_sense(y, sens)?;
    let mut history = Vec::with_capacity(cfg.iters + 1);
    history.push(objective(&x, y, sens, cfg.lambda, levels)?);
    for _ in 0..cfg.iters {
        let r = data_residual(&x, y, sens)?;
        let grad = adjoint_sense(&r, sens)?;
        let z = axpy(&x, -step, &grad);
        let coeffs = dwt2(&z, levels)?;
        let shrunk = soft_threshold(&coeffs, step * cfg.lambda);
        x = idwt2(&shrunk)?;
        history.push(objective(&x, y, sens, cfg.lambda, levels)?);
    }
    Ok(CsResult { image: x, objective: history })
}

/// Regularization weights for the CS baseline, tabulated per acceleration
/// and relative noise level, with linear interpolation in sigma.
pub fn cs_lambda_schedule(accel: f64, sigma: f64) -> Result<f64> {
    const SIGMAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    const LAMBDA_12X: [f64; 6] = [0.07, 0.15, 0.3, 0.6, 0.9, 1.2];
    const LAMBDA_16X: [f64; 6] = [0.06, 0.12, 0.25, 0.5, 0.8, 1.1];
    let row: &[f64; 6] = if (accel - 12.0).abs() < 1e-9 {
        &LAMBDA_12X
    } else if (accel - 16.0).abs() < 1e-9 {
        &LAMBDA_16X
    } else {
        return Err(Error::config(format!(
            "lambda schedule tabulated for R in {{12, 16}}, got {accel}"
        )));
    };
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::config(format!(
            "lambda schedule covers sigma in [0, 1], got {sigma}"
        )));
    }
    let pos = sigma / 0.2;
    let lo = (pos.floor() as usize).min(4);
    let frac = pos - lo as f64;
    Ok(row[lo] * (1.0 - frac) + row[lo + 1] * frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::{all_ones_mask, make_coil_sensitivities, make_phantom};

    #[test]
    fn lambda_schedule_matches_table() {
        let table = [
            (12.0, 0.0, 0.07),
            (12.0, 0.2, 0.15),
            (12.0, 0.4, 0.3),
            (12.0, 0.6, 0.6),
            (12.0, 0.8, 0.9),
            (12.0, 1.0, 1.2),
            (16.0, 0.0, 0.06),
            (16.0, 0.2, 0.12),
            (16.0, 0.4, 0.25),
            (16.0, 0.6, 0.5),
            (16.0, 0.8, 0.8),
            (16.0, 1.0, 1.1),
        ];
        for (r, s, want) in table {
            let got = cs_lambda_schedule(r, s).unwrap();
            assert!((got - want).abs() < 1e-12, "({r}, {s}) -> {got}");
        }
        // Linear interpolation between columns.
        let mid = cs_lambda_schedule(12.0, 0.3).unwrap();
        assert!((mid - 0.225).abs() < 1e-12);
        assert!(matches!(cs_lambda_schedule(8.0, 0.0), Err(Error::Config(_))));
        assert!(matches!(cs_lambda_schedule(12.0, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn fully_sampled_lambda_zero_recovers_input() {
        // A^H A = I, so with lambda = 0 the iteration is exact data
        // consistency from the first step.
        let x = make_phantom(32, 32, 4).unwrap();
        let sens = make_coil_sensitivities(32, 32, 3, 5).unwrap();
        let mask = all_ones_mask(32, 32);
        let y = forward_model(&x, &sens, &mask).unwrap();
        let cfg = CsConfig::with_lambda(0.0).unwrap();
        let out = cs_reconstruct(&y, &sens, &cfg).unwrap();
        let err: f64 = out
            .image
            .data()
            .iter()
            .zip(x.data().iter())
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let norm: f64 = x.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-4, "relative error {}", err / norm);
    }

    #[test]
    fn objective_is_monotone_nonincreasing() {
        let x = make_phantom(32, 32, 6).unwrap();
        let sens = make_coil_sensitivities(32, 32, 4, 7).unwrap();
        let mask = crate::kspace::make_poisson_disc_mask(32, 32, 3.0, 8, 8).unwrap();
        let y = forward_model(&x, &sens, &mask).unwrap();
        let cfg = CsConfig::with_lambda(0.02).unwrap();
        let out = cs_reconstruct(&y, &sens, &cfg).unwrap();
        for pair in out.objective.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-12),
                "objective increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn larger_lambda_never_increases_coefficient_l1() {
        let x = make_phantom(32, 32, 10).unwrap();
        let sens = make_coil_sensitivities(32, 32, 4, 11).unwrap();
        let mask = crate::kspace::make_poisson_disc_mask(32, 32, 3.0, 8, 12).unwrap();
        let y = forward_model(&x, &sens, &mask).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.01, 0.05, 0.1, 0.5] {
            let out = cs_reconstruct(&y, &sens, &CsConfig::with_lambda(lambda).unwrap()).unwrap();
            let l1 = dwt2(&out.image, default_levels(32, 32)).unwrap().l1_norm();
            assert!(l1 <= last * (1.0 + 1e-9), "l1 {l1} after {last} at lambda {lambda}");
            last = l1;
        }
    }
}
