//! Evaluation metrics for synthesized coefficients: normalized peak sidelobe
//! levels, service SNR, out-of-beam received power and the modulus ratio.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::beampattern::{separable_factors, ura_magnitudes, ArrayConfig, PatternGrid};
use crate::error::{Error, Result};
use crate::geometry::SatGeometry;
use crate::linkbudget::LinkBudget;
use crate::masks::{build_grids, planar_sidelobe_edge, DesignSpec};
use crate::units::{finite_or_none, lin_to_db, watts_to_dbm};

/// Azimuth step of planar evaluation grids.
pub const PHI_STEP: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Worst of the two axis cuts; `None` when `W` is not separable.
    pub npsl_ula_db: Option<f64>,
    pub npsl_ula_x_db: Option<f64>,
    pub npsl_ula_y_db: Option<f64>,
    pub npsl_ura_db: Option<f64>,
    pub snr_svc_db: Option<f64>,
    pub p_r_oob_dbm: Option<f64>,
    pub eta_cmc: Option<f64>,
    /// Off-nadir step of the evaluation grids, degrees.
    pub grid_step_deg: f64,
    pub phi_step_deg: f64,
}

fn nonempty(points: usize, what: &str) -> Result<()> {
    if points == 0 {
        return Err(Error::param(format!("{what} evaluation grid is empty")));
    }
    Ok(())
}

fn ratio_db(peak: f64, floor: f64) -> f64 {
    20.0 * (peak / floor).log10()
}

/// `20 log10(max_Θs |B|/√σ̃ / min_Θm |B|/√σ̃)` on a grid of step `grid_step`.
pub fn npsl_ula(
    x: &DVector<Complex64>,
    cfg: &ArrayConfig,
    spec: &DesignSpec,
    geo: &SatGeometry,
    grid_step: f64,
) -> Result<f64> {
    let grids = build_grids(&spec.with_delta(grid_step)?, geo)?;
    nonempty(grids.n_svc(), "main-lobe")?;
    nonempty(grids.n_s(), "sidelobe")?;
    let normalized = |angles: &[f64], mask: &[f64]| -> Result<Vec<f64>> {
        Ok(PatternGrid::new(cfg, angles)
            .magnitudes(x)?
            .into_iter()
            .zip(mask)
            .map(|(b, s)| b / s.sqrt())
            .collect())
    };
    let side = normalized(&grids.sidelobe_angles, &grids.sidelobe_mask)?;
    let main = normalized(&grids.mainlobe_angles, &grids.mainlobe_mask)?;
    let peak = side.iter().copied().fold(0.0, f64::max);
    let floor = main.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ratio_db(peak, floor))
}

/// Samples `θ ∈ [lo, hi]` with step `theta_step` (both ends kept) against
/// `φ ∈ [0, 2π)` with step `phi_step`.
pub fn planar_grid(lo: f64, hi: f64, theta_step: f64, phi_step: f64) -> Result<Vec<(f64, f64)>> {
    if !(theta_step > 0.0 && phi_step > 0.0) {
        return Err(Error::param("grid steps must be positive"));
    }
    if !(hi >= lo) {
        return Err(Error::param("planar grid bounds are reversed"));
    }
    let n_theta = ((hi - lo) / theta_step).round() as usize;
    let n_phi = ((2.0 * std::f64::consts::PI / phi_step).round() as usize).max(1);
    let mut points = Vec::with_capacity((n_theta + 1) * n_phi);
    for i in 0..=n_theta {
        let theta = if n_theta == 0 {
            lo
        } else if i == n_theta {
            hi
        } else {
            lo + (hi - lo) * i as f64 / n_theta as f64
        };
        for j in 0..n_phi {
            points.push((theta, j as f64 * phi_step));
        }
    }
    Ok(points)
}

/// Main-lobe and sidelobe sets of the planar pattern.
#[derive(Debug, Clone)]
pub struct PlanarGrids {
    pub mainlobe: Vec<(f64, f64)>,
    pub sidelobe: Vec<(f64, f64)>,
}

impl PlanarGrids {
    /// `θ ∈ [0, θ_svc]` and `θ ∈ [θ_s, θ_e]`, where `θ_s` maps to the linear
    /// sidelobe edge under the 45° cut.
    pub fn new(spec: &DesignSpec, theta_step: f64, phi_step: f64) -> Result<Self> {
        let theta_s = planar_sidelobe_edge(spec.theta_s_star)?;
        if theta_s > spec.theta_e {
            return Err(Error::param(
                "planar sidelobe edge lies past the field of view",
            ));
        }
        Ok(Self {
            mainlobe: planar_grid(0.0, spec.theta_svc, theta_step, phi_step)?,
            sidelobe: planar_grid(theta_s, spec.theta_e, theta_step, phi_step)?,
        })
    }
}

/// Pattern magnitudes over the planar grids divided by `σ(θ)`.
struct PlanarSamples {
    main: Vec<f64>,
    side: Vec<f64>,
    main_sq: Vec<f64>,
    side_sq: Vec<f64>,
}

fn planar_samples(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    geo: &SatGeometry,
    grids: &PlanarGrids,
) -> Result<PlanarSamples> {
    nonempty(grids.mainlobe.len(), "main-lobe")?;
    nonempty(grids.sidelobe.len(), "sidelobe")?;
    let sample = |points: &[(f64, f64)]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mags = ura_magnitudes(w, cfg_x, cfg_y, points)?;
        let sigma = points
            .par_iter()
            .map(|&(theta, _)| geo.isoflux_sigma(theta))
            .collect::<Result<Vec<f64>>>()?;
        let normalized = mags.iter().zip(&sigma).map(|(b, s)| b / s).collect();
        let squared = mags.iter().map(|b| b * b).collect();
        Ok((normalized, squared))
    };
    let (main, main_sq) = sample(&grids.mainlobe)?;
    let (side, side_sq) = sample(&grids.sidelobe)?;
    Ok(PlanarSamples {
        main,
        side,
        main_sq,
        side_sq,
    })
}

impl PlanarSamples {
    fn npsl_db(&self) -> f64 {
        let peak = self.side.iter().copied().fold(0.0, f64::max);
        let floor = self.main.iter().copied().fold(f64::INFINITY, f64::min);
        ratio_db(peak, floor)
    }
}

/// Planar NPSL over the planar main-lobe and sidelobe sets.
pub fn npsl_ura(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    geo: &SatGeometry,
    grids: &PlanarGrids,
) -> Result<f64> {
    Ok(planar_samples(w, cfg_x, cfg_y, geo, grids)?.npsl_db())
}

fn min_snr_db(
    budget: &LinkBudget,
    geo: &SatGeometry,
    points: &[(f64, f64)],
    pattern_sq: &[f64],
) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for (&(theta, _), &g) in points.iter().zip(pattern_sq) {
        worst = worst.min(budget.snr_from_gain(geo, theta, g)?);
    }
    Ok(lin_to_db(worst))
}

fn max_power_dbm(
    budget: &LinkBudget,
    geo: &SatGeometry,
    points: &[(f64, f64)],
    pattern_sq: &[f64],
) -> Result<f64> {
    let mut peak = 0.0f64;
    for (&(theta, _), &g) in points.iter().zip(pattern_sq) {
        peak = peak.max(budget.received_power_from_gain(geo, theta, g)?);
    }
    Ok(watts_to_dbm(peak))
}

/// Minimum received SNR over the planar main-lobe set, dB.
pub fn snr_svc(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    budget: &LinkBudget,
    geo: &SatGeometry,
    grids: &PlanarGrids,
) -> Result<f64> {
    let s = planar_samples(w, cfg_x, cfg_y, geo, grids)?;
    min_snr_db(budget, geo, &grids.mainlobe, &s.main_sq)
}

/// Peak received power over the planar sidelobe set, dBm.
pub fn p_r_oob(
    w: &DMatrix<Complex64>,
    cfg_x: &ArrayConfig,
    cfg_y: &ArrayConfig,
    budget: &LinkBudget,
    geo: &SatGeometry,
    grids: &PlanarGrids,
) -> Result<f64> {
    let s = planar_samples(w, cfg_x, cfg_y, geo, grids)?;
    max_power_dbm(budget, geo, &grids.sidelobe, &s.side_sq)
}

/// `max |W| / min |W|`
pub fn eta_cmc(w: &DMatrix<Complex64>) -> Result<f64> {
    if w.is_empty() || w.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::param("coefficients are all zero"));
    }
    let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), c| {
        (lo.min(c.norm()), hi.max(c.norm()))
    });
    Ok(hi / lo)
}

/// Everything needed to score a coefficient matrix.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub cfg_x: ArrayConfig,
    pub cfg_y: ArrayConfig,
    pub spec: DesignSpec,
    pub geo: SatGeometry,
    pub budget: LinkBudget,
    pub grid_step: f64,
    pub phi_step: f64,
}

impl Evaluator {
    /// Computes the full report. Linear-array NPSL needs separable `W`; the
    /// factors are taken from `axes` when given and from an SVD otherwise.
    pub fn evaluate(
        &self,
        w: &DMatrix<Complex64>,
        axes: Option<(&DVector<Complex64>, &DVector<Complex64>)>,
    ) -> Result<MetricsReport> {
        let grids = PlanarGrids::new(&self.spec, self.grid_step, self.phi_step)?;
        let samples = planar_samples(w, &self.cfg_x, &self.cfg_y, &self.geo, &grids)?;
        let factors = match axes {
            Some((x, y)) => Some((x.clone(), y.clone())),
            None => separable_factors(w),
        };
        let (npsl_x, npsl_y) = match &factors {
            Some((x, y)) => (
                Some(npsl_ula(
                    x,
                    &self.cfg_x,
                    &self.spec,
                    &self.geo,
                    self.grid_step,
                )?),
                Some(npsl_ula(
                    y,
                    &self.cfg_y,
                    &self.spec,
                    &self.geo,
                    self.grid_step,
                )?),
            ),
            None => (None, None),
        };
        let worst = match (npsl_x, npsl_y) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        let eta = if w.iter().all(|v| v.norm() == 0.0) {
            f64::INFINITY
        } else {
            eta_cmc(w)?
        };
        Ok(MetricsReport {
            npsl_ula_db: worst.and_then(finite_or_none),
            npsl_ula_x_db: npsl_x.and_then(finite_or_none),
            npsl_ula_y_db: npsl_y.and_then(finite_or_none),
            npsl_ura_db: finite_or_none(samples.npsl_db()),
            snr_svc_db: finite_or_none(min_snr_db(
                &self.budget,
                &self.geo,
                &grids.mainlobe,
                &samples.main_sq,
            )?),
            p_r_oob_dbm: finite_or_none(max_power_dbm(
                &self.budget,
                &self.geo,
                &grids.sidelobe,
                &samples.side_sq,
            )?),
            eta_cmc: finite_or_none(eta),
            grid_step_deg: self.grid_step.to_degrees(),
            phi_step_deg: self.phi_step.to_degrees(),
        })
    }
}
