//! Steering vectors and array patterns for linear and rectangular arrays.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub elements: usize,
    /// Element spacing in carrier wavelengths.
    pub spacing_wavelengths: f64,
    pub carrier_hz: f64,
}

impl ArrayConfig {
    pub fn new(elements: usize, spacing_wavelengths: f64, carrier_hz: f64) -> Result<Self> {
        if elements == 0 {
            return Err(Error::param("array needs at least one element"));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(Error::param("element spacing must be positive"));
        }
        if !(carrier_hz > 0.0) {
            return Err(Error::param("carrier frequency must be positive"));
        }
        Ok(Self {
            elements,
            spacing_wavelengths,
            carrier_hz,
        })
    }

    /// Electrical phase step between neighbouring elements toward `vartheta`.
    pub fn phase_step(&self, vartheta: f64) -> f64 {
        2.0 * PI * self.spacing_wavelengths * vartheta.sin()
    }
}

/// `a[m] = exp(-j 2π d m sin ϑ)`.
pub fn steering_vector(cfg: &ArrayConfig, vartheta: f64) -> DVector<Complex64> {
    let u = cfg.phase_step(vartheta);
    DVector::from_fn(cfg.elements, |m, _| {
        Complex64::from_polar(1.0, -u * m as f64)
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// `xᴴ a(ϑ)`.
pub fn ula_pattern(x: &DVector<Complex64>, cfg: &ArrayConfig, vartheta: f64) -> Result<Complex64> {
    check_len(cfg.elements, x.len())?;
    let u = cfg.phase_step(vartheta);
    Ok(x.iter()
        .enumerate()
        .map(|(m, xm)| xm.conj() * Complex64::from_polar(1.0, -u * m as f64))
        .sum())
}

/// Projections of a planar direction onto the two array axes.
pub fn angle_decompose(theta: f64, phi: f64) -> (f64, f64) {
    let s = theta.sin();
    ((s * phi.cos()).asin(), (s * phi.sin()).asin())
}

/// Full double sum over a coefficient matrix `W` (rows along x).
pub fn ura_pattern(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    theta: f64,
    phi: f64,
) -> Result<Complex64> {
    check_len(cfg_x.elements, w.nrows())?;
    check_len(cfg_y.elements, w.ncols())?;
    let ux = 2.0 * PI * cfg_x.spacing_wavelengths * theta.sin() * phi.cos();
    let uy = 2.0 * PI * cfg_y.spacing_wavelengths * theta.sin() * phi.sin();
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..w.ncols() {
        for m in 0..w.nrows() {
            let phase = -(ux * m as f64 + uy * l as f64);
            acc += w[(m, l)].conj() * Complex64::from_polar(1.0, phase);
        }
    }
    Ok(acc)
}

/// Steering matrix for a fixed set of angles, one row per angle.
///
/// Evaluating a pattern on the whole grid is then a single matrix-vector
/// product against the conjugated coefficients.
#[derive(Debug, Clone)]
pub struct PatternGrid {
    pub angles: Vec<f64>,
    steering: DMatrix<Complex64>,
}

impl PatternGrid {
    pub fn new(cfg: &ArrayConfig, angles: &[f64]) -> Self {
        let steering = DMatrix::from_fn(angles.len(), cfg.elements, |k, m| {
            Complex64::from_polar(1.0, -cfg.phase_step(angles[k]) * m as f64)
        });
        Self {
            angles: angles.to_vec(),
            steering,
        }
    }

    pub fn evaluate(&self, x: &DVector<Complex64>) -> Result<Vec<Complex64>> {
        check_len(self.steering.ncols(), x.len())?;
        let xc = x.map(|v| v.conj());
        Ok((&self.steering * xc).iter().copied().collect())
    }

    pub fn magnitudes(&self, x: &DVector<Complex64>) -> Result<Vec<f64>> {
        Ok(self.evaluate(x)?.into_iter().map(|b| b.norm()).collect())
    }
}

/// Planar pattern magnitudes on arbitrary `(θ, φ)` samples.
///
/// Separable coefficient matrices are evaluated as a product of two linear
/// patterns; anything else falls back to the double sum.
pub fn ura_magnitudes(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    points: &[(f64, f64)],
) -> Result<Vec<f64>> {
    check_len(cfg_x.elements, w.nrows())?;
    check_len(cfg_y.elements, w.ncols())?;
    if let Some((x, y)) = separable_factors(w) {
        return Ok(points
            .par_iter()
            .map(|&(theta, phi)| {
                let (vx, vy) = angle_decompose(theta, phi);
                let bx = ula_pattern(&x, cfg_x, vx).unwrap_or_default();
                let by = ula_pattern(&y, cfg_y, vy).unwrap_or_default();
                (bx * by).norm()
            })
            .collect());
    }
    // aₓᵀ conj(W) a_y, with the steering vectors built once per direction.
    let wc = w.map(|v| v.conj());
    Ok(points
        .par_iter()
        .map(|&(theta, phi)| {
            let (vx, vy) = angle_decompose(theta, phi);
            let ax = steering_vector(cfg_x, vx);
            let ay = steering_vector(cfg_y, vy);
            (ax.transpose() * &wc * ay)[(0, 0)].norm()
        })
        .collect())
}

/// Rank-one factors `W = x yᵀ` when `W` is numerically separable.
///
/// `x` is the column of largest norm and `y` the projection of every column
/// onto it; the pair is rescaled to equal RMS modulus.
pub fn separable_factors(
    w: &DMatrix<Complex64>,
) -> Option<(DVector<Complex64>, DVector<Complex64>)> {
    if w.is_empty() {
        return None;
    }
    let pivot =
        (0..w.ncols()).max_by(|&a, &b| w.column(a).norm().total_cmp(&w.column(b).norm()))?;
    let x = w.column(pivot).into_owned();
    let xx = x.norm_squared();
    if xx == 0.0 {
        return None;
    }
    let y = DVector::from_fn(w.ncols(), |l, _| x.dotc(&w.column(l)) / xx);
    let residual = (w - &x * y.transpose()).norm();
    if residual > 1e-12 * w.norm() {
        return None;
    }
    let rms_x = x.norm() / (x.len() as f64).sqrt();
    let rms_y = y.norm() / (y.len() as f64).sqrt();
    if rms_y == 0.0 {
        return None;
    }
    let s = Complex64::from((rms_y / rms_x).sqrt());
    Some((x * s, y / s))
}
