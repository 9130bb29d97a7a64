//! Broadened-beam versus hopping narrow-beam capacity, including the number of
//! narrow beams needed to tile each broadened footprint.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SatGeometry;
use crate::linkbudget::LinkBudget;
use crate::units::{db_to_lin, lin_to_db};

/// 3 dB beamwidth of an `elements`-long array at broadside.
pub fn bw3db(elements: usize, spacing_wavelengths: f64) -> Result<f64> {
    if elements < 2 {
        return Err(Error::param("beamwidth needs at least two elements"));
    }
    let arg = 0.891 / ((elements - 1) as f64 * spacing_wavelengths);
    if !(arg.abs() <= 1.0) {
        return Err(Error::domain(format!(
            "beamwidth formula argument {arg:.4} outside [-1, 1]"
        )));
    }
    Ok(arg.asin())
}

/// 3 dB beamwidth of a beam steered to `theta_t`.
pub fn bw3db_steered(elements: usize, spacing_wavelengths: f64, theta_t: f64) -> Result<f64> {
    if elements < 2 {
        return Err(Error::param("beamwidth needs at least two elements"));
    }
    let half = 0.443 / ((elements - 1) as f64 * spacing_wavelengths);
    let (hi, lo) = (theta_t.sin() + half, theta_t.sin() - half);
    if !(hi.abs() <= 1.0 && lo.abs() <= 1.0) {
        return Err(Error::domain(format!(
            "steered beam at {:.3} deg leaves visible space",
            theta_t.to_degrees()
        )));
    }
    Ok(hi.asin() - lo.asin())
}

/// Peak squared gain of a uniformly weighted `M × M` array.
pub fn narrow_peak_gain(elements: usize) -> f64 {
    (elements as f64).powi(4)
}

/// Worst SNR inside the 3 dB beamwidth of a nadir narrow beam, dB.
///
/// Uses half the peak squared gain and the mask value at the 3 dB edge.
pub fn narrow_snr(
    elements: usize,
    spacing_wavelengths: f64,
    budget: &LinkBudget,
    geo: &SatGeometry,
) -> Result<f64> {
    let edge = bw3db(elements, spacing_wavelengths)? / 2.0;
    let snr = budget.snr_from_gain(geo, edge, 0.5 * narrow_peak_gain(elements))?;
    Ok(lin_to_db(snr))
}

/// Shannon capacity in bit/s.
pub fn shannon(bandwidth_hz: f64, snr_db: f64) -> f64 {
    bandwidth_hz * (1.0 + db_to_lin(snr_db)).log2()
}

/// Narrow-beam footprint area for one steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeredArea {
    pub theta_t_deg: f64,
    pub area_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityInputs {
    pub elements: usize,
    pub spacing_wavelengths: f64,
    pub beamwidths_deg: Vec<f64>,
    pub snr_b_db: Vec<f64>,
    /// Broadened footprint per beamwidth.
    pub areas_broad_km2: Vec<f64>,
    /// Narrow footprints by steering angle.
    pub areas_narrow: Vec<SteeredArea>,
}

/// Source of footprint areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaProvider {
    /// Published footprint tables.
    Tabulated,
    /// Spherical caps and the steered-footprint procedure.
    Geometry,
}

const TABLE_BROAD: [(f64, f64); 3] = [(10.0, 7_279.0), (30.0, 68_666.0), (60.0, 326_450.0)];
const TABLE_NARROW: [(f64, f64); 4] = [
    (0.0, 786.23),
    (5.0, 820.12),
    (15.0, 1_203.9),
    (30.0, 5_741.8),
];

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Steering angles needed by [`beam_counts`]: each tier's edge, `Θ_bw / 2`.
pub fn steering_angles_deg(beamwidths_deg: &[f64]) -> Vec<f64> {
    beamwidths_deg.iter().map(|b| b / 2.0).collect()
}

impl AreaProvider {
    pub fn broad_area(self, geo: &SatGeometry, beamwidth_deg: f64) -> Result<f64> {
        match self {
            AreaProvider::Tabulated => TABLE_BROAD
                .iter()
                .find(|(b, _)| close(*b, beamwidth_deg))
                .map(|(_, a)| *a)
                .ok_or_else(|| {
                    Error::param(format!(
                        "no tabulated broadened area for {beamwidth_deg} deg"
                    ))
                }),
            AreaProvider::Geometry => geo.cap_area((beamwidth_deg / 2.0).to_radians()),
        }
    }

    /// Narrow footprint at `theta_t_deg`. The geometry provider uses the
    /// broadside beamwidth at nadir and the steered beamwidth elsewhere.
    pub fn narrow_area(
        self,
        geo: &SatGeometry,
        elements: usize,
        spacing_wavelengths: f64,
        theta_t_deg: f64,
    ) -> Result<f64> {
        match self {
            AreaProvider::Tabulated => TABLE_NARROW
                .iter()
                .find(|(t, _)| close(*t, theta_t_deg))
                .map(|(_, a)| *a)
                .ok_or_else(|| {
                    Error::param(format!(
                        "no tabulated narrow-beam area at {theta_t_deg} deg"
                    ))
                }),
            AreaProvider::Geometry => {
                let theta_t = theta_t_deg.to_radians();
                let bw = if theta_t == 0.0 {
                    bw3db(elements, spacing_wavelengths)?
                } else {
                    bw3db_steered(elements, spacing_wavelengths, theta_t)?
                };
                geo.steered_footprint_area(theta_t, bw)
            }
        }
    }

    pub fn inputs(
        self,
        geo: &SatGeometry,
        elements: usize,
        spacing_wavelengths: f64,
        beamwidths_deg: &[f64],
        snr_b_db: &[f64],
    ) -> Result<CapacityInputs> {
        let areas_broad_km2 = beamwidths_deg
            .iter()
            .map(|&b| self.broad_area(geo, b))
            .collect::<Result<_>>()?;
        let areas_narrow = steering_angles_deg(beamwidths_deg)
            .into_iter()
            .map(|t| {
                Ok(SteeredArea {
                    theta_t_deg: t,
                    area_km2: self.narrow_area(geo, elements, spacing_wavelengths, t)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(CapacityInputs {
            elements,
            spacing_wavelengths,
            beamwidths_deg: beamwidths_deg.to_vec(),
            snr_b_db: snr_b_db.to_vec(),
            areas_broad_km2,
            areas_narrow,
        })
    }
}

impl CapacityInputs {
    pub fn validate(&self) -> Result<()> {
        let n = self.beamwidths_deg.len();
        if n == 0 {
            return Err(Error::param("beamwidth list is empty"));
        }
        if self.snr_b_db.len() != n || self.areas_broad_km2.len() != n {
            return Err(Error::param(format!(
                "expected {n} service SNRs and broadened areas, got {} and {}",
                self.snr_b_db.len(),
                self.areas_broad_km2.len()
            )));
        }
        if self.beamwidths_deg.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("beamwidths must be strictly ascending"));
        }
        let areas = self
            .areas_broad_km2
            .iter()
            .chain(self.areas_narrow.iter().map(|a| &a.area_km2));
        for &a in areas {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param(format!("area {a} km^2 must be positive")));
            }
        }
        Ok(())
    }

    fn narrow_area_at(&self, theta_t_deg: f64) -> Result<f64> {
        self.areas_narrow
            .iter()
            .find(|a| close(a.theta_t_deg, theta_t_deg))
            .map(|a| a.area_km2)
            .ok_or_else(|| {
                Error::param(format!(
                    "missing narrow-beam area for steering angle {theta_t_deg} deg"
                ))
            })
    }
}

/// Narrow beams needed to cover each broadened footprint.
///
/// Each tier adds the annulus between its footprint and the previous one,
/// tiled by narrow beams steered to the tier edge.
pub fn beam_counts(inputs: &CapacityInputs) -> Result<Vec<usize>> {
    inputs.validate()?;
    let mut counts = Vec::with_capacity(inputs.beamwidths_deg.len());
    let mut covered = 0.0;
    let mut total = 0usize;
    for (&bw, &area) in inputs.beamwidths_deg.iter().zip(&inputs.areas_broad_km2) {
        let cell = inputs.narrow_area_at(bw / 2.0)?;
        let annulus = (area - covered).max(0.0);
        total += ((annulus / cell).ceil() as usize).max(1);
        counts.push(total);
        covered = area;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NarrowBeam {
    pub bw3db_deg: f64,
    pub peak_gain: f64,
    pub snr_db: f64,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityRow {
    pub beamwidth_deg: f64,
    pub snr_b_db: f64,
    pub c_b_mbps: f64,
    pub area_broad_km2: f64,
    pub theta_t_deg: f64,
    pub area_narrow_km2: f64,
    pub n_min: usize,
    pub c_n_per_beam_mbps: f64,
    /// `C_b / (C_n / N_min)`
    pub gain_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    pub narrow: NarrowBeam,
    pub rows: Vec<CapacityRow>,
}

pub fn capacities(
    inputs: &CapacityInputs,
    budget: &LinkBudget,
    geo: &SatGeometry,
) -> Result<CapacityReport> {
    let counts = beam_counts(inputs)?;
    let snr_n = narrow_snr(inputs.elements, inputs.spacing_wavelengths, budget, geo)?;
    let c_n = shannon(budget.bandwidth_hz, snr_n) / 1e6;
    let narrow = NarrowBeam {
        bw3db_deg: bw3db(inputs.elements, inputs.spacing_wavelengths)?.to_degrees(),
        peak_gain: narrow_peak_gain(inputs.elements),
        snr_db: snr_n,
        capacity_mbps: c_n,
    };
    let rows = inputs
        .beamwidths_deg
        .iter()
        .zip(&inputs.snr_b_db)
        .zip(&inputs.areas_broad_km2)
        .zip(&counts)
        .map(|(((&bw, &snr_b), &area), &n_min)| {
            let c_b = shannon(budget.bandwidth_hz, snr_b) / 1e6;
            let per_beam = c_n / n_min as f64;
            Ok(CapacityRow {
                beamwidth_deg: bw,
                snr_b_db: snr_b,
                c_b_mbps: c_b,
                area_broad_km2: area,
                theta_t_deg: bw / 2.0,
                area_narrow_km2: inputs.narrow_area_at(bw / 2.0)?,
                n_min,
                c_n_per_beam_mbps: per_beam,
                gain_ratio: c_b / per_beam,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CapacityReport { narrow, rows })
}

pub fn write_capacity_csv<W: Write>(report: &CapacityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
