//! Starting vectors for the rank-one iteration.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Constant-modulus quadratic-phase taper `x_m = exp(jπ γ m̄² / M)` with the
/// centered index `m̄ = m - (M-1)/2`.
///
/// The instantaneous phase slope sweeps `±πγ` across the aperture, so
/// `γ = 2 d_e sin θ_svc` spreads the beam over the service half-width.
pub fn chirp(
    elements: usize,
    spacing_wavelengths: f64,
    theta_svc: f64,
) -> Result<DVector<Complex64>> {
    if elements == 0 {
        return Err(Error::param("array needs at least one element"));
    }
    let m = elements as f64;
    let gamma = 2.0 * spacing_wavelengths * theta_svc.sin();
    Ok(DVector::from_fn(elements, |k, _| {
        let c = k as f64 - (m - 1.0) / 2.0;
        Complex64::from_polar(1.0, std::f64::consts::PI * gamma * c * c / m)
    }))
}

/// Projects each entry onto the unit circle. Returns the vector and whether
/// any entry had to change.
pub fn normalize_modulus(x: &DVector<Complex64>) -> Result<(DVector<Complex64>, bool)> {
    let mut changed = false;
    let mut out = x.clone();
    for v in out.iter_mut() {
        let r = v.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::param(
                "initial vector has a zero or non-finite entry",
            ));
        }
        if (r - 1.0).abs() > 1e-12 {
            changed = true;
        }
        *v /= r;
    }
    Ok((out, changed))
}
