//! Downlink budget: nadir transmission loss, source power, received power and
//! SNR, and the main-lobe floor implied by an SNR target.
//!
//! Everything is stored linear (W, K, ratios); dB only at the edges.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beampattern::{ura_pattern, ArrayConfig};
use crate::error::{Error, Result};
use crate::geometry::SatGeometry;
use crate::units::{db_to_lin, lin_to_db};

pub const BOLTZMANN: f64 = 1.380649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Linear loss factors (each ≥ 1 for a physical loss).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub cable_tx: f64,
    pub cable_rx: f64,
    pub atmospheric: f64,
    pub shadowing: f64,
    pub scintillation: f64,
}

impl Losses {
    pub fn from_db(
        cable_tx: f64,
        cable_rx: f64,
        atmospheric: f64,
        shadowing: f64,
        scintillation: f64,
    ) -> Self {
        Self {
            cable_tx: db_to_lin(cable_tx),
            cable_rx: db_to_lin(cable_rx),
            atmospheric: db_to_lin(atmospheric),
            shadowing: db_to_lin(shadowing),
            scintillation: db_to_lin(scintillation),
        }
    }

    pub fn product(&self) -> f64 {
        self.cable_tx * self.cable_rx * self.atmospheric * self.shadowing * self.scintillation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// PA gain β.
    pub pa_gain: f64,
    /// Receive antenna gain G_R.
    pub rx_gain: f64,
    /// LNA gain γ. Enters received power only; it cancels out of the SNR.
    pub lna_gain: f64,
    /// Receive G/T in 1/K. The SNR uses this ratio, never G_R and T_sys separately.
    pub g_over_t: f64,
    pub system_temp_k: f64,
    pub losses: Losses,
    /// Per-element source power P_s.
    pub source_power_w: f64,
    /// Subarray size (Q_x, Q_y).
    pub subarray: [usize; 2],
    /// RF chain grid (N_x, N_y).
    pub rf_chains: [usize; 2],
    pub boltzmann: f64,
    pub speed_of_light: f64,
}

/// Power amplifier operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaBudget {
    pub pa_avg_w: f64,
    pub source_power_w: f64,
    pub transmit_power_w: f64,
}

/// `T_a + (F - 1) T_0` with the noise figure given in dB.
pub fn system_temperature(antenna_temp_k: f64, noise_figure_db: f64, reference_temp_k: f64) -> f64 {
    antenna_temp_k + (db_to_lin(noise_figure_db) - 1.0) * reference_temp_k
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        positive("carrier frequency", self.carrier_hz)?;
        positive("bandwidth", self.bandwidth_hz)?;
        positive("PA gain", self.pa_gain)?;
        positive("receive gain", self.rx_gain)?;
        positive("G/T", self.g_over_t)?;
        positive("system temperature", self.system_temp_k)?;
        positive("source power", self.source_power_w)?;
        positive("Boltzmann constant", self.boltzmann)?;
        positive("speed of light", self.speed_of_light)?;
        positive("loss product", self.losses.product())?;
        if self.subarray.contains(&0) || self.rf_chains.contains(&0) {
            return Err(Error::param(
                "subarray and RF chain counts must be positive",
            ));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }

    /// Nadir transmission loss, linear.
    pub fn l0(&self, geo: &SatGeometry) -> Result<f64> {
        positive("carrier frequency", self.carrier_hz)?;
        positive("loss product", self.losses.product())?;
        let spreading = 4.0 * std::f64::consts::PI * geo.altitude_km * 1e3 / self.wavelength_m();
        Ok(self.losses.product() * spreading * spreading)
    }

    pub fn l0_db(&self, geo: &SatGeometry) -> Result<f64> {
        Ok(lin_to_db(self.l0(geo)?))
    }

    fn elements_per_chain(&self) -> f64 {
        (self.subarray[0] * self.subarray[1]) as f64
    }

    /// PA operating point from the average output power.
    pub fn pa_from_average(&self, pa_avg_w: f64) -> Result<PaBudget> {
        positive("PA average power", pa_avg_w)?;
        positive("PA gain", self.pa_gain)?;
        Ok(PaBudget {
            pa_avg_w,
            source_power_w: pa_avg_w / (self.pa_gain * self.elements_per_chain()),
            transmit_power_w: pa_avg_w * (self.rf_chains[0] * self.rf_chains[1]) as f64,
        })
    }

    /// PA operating point from the saturated power and the backoff.
    pub fn ps_from_pa(&self, pa_max_w: f64, backoff_db: f64) -> Result<PaBudget> {
        positive("PA maximum power", pa_max_w)?;
        if !backoff_db.is_finite() {
            return Err(Error::param("backoff must be finite"));
        }
        self.pa_from_average(pa_max_w * db_to_lin(-backoff_db))
    }

    /// `β P_s G/T / (L0 k f_BW)`: SNR per unit squared pattern at nadir.
    fn snr_scale(&self, geo: &SatGeometry) -> Result<f64> {
        Ok(self.pa_gain * self.source_power_w * self.g_over_t
            / (self.l0(geo)? * self.boltzmann * self.bandwidth_hz))
    }

    /// Amplitude floor on the planar pattern (relative to σ) that meets `snr_min_db`.
    pub fn alpha_floor(&self, geo: &SatGeometry, snr_min_db: f64) -> Result<f64> {
        let snr = db_to_lin(snr_min_db);
        positive("minimum SNR", snr)?;
        Ok((snr / self.snr_scale(geo)?).sqrt())
    }

    /// Linear SNR for a squared pattern magnitude seen at off-nadir angle `theta`.
    pub fn snr_from_gain(&self, geo: &SatGeometry, theta: f64, pattern_sq: f64) -> Result<f64> {
        let sigma = geo.isoflux_sigma(theta)?;
        Ok(self.snr_scale(geo)? * pattern_sq / (sigma * sigma))
    }

    /// Received power in W for a squared pattern magnitude at `theta`.
    pub fn received_power_from_gain(
        &self,
        geo: &SatGeometry,
        theta: f64,
        pattern_sq: f64,
    ) -> Result<f64> {
        let sigma = geo.isoflux_sigma(theta)?;
        Ok(
            self.pa_gain * self.lna_gain * self.rx_gain * self.source_power_w * pattern_sq
                / (sigma * sigma * self.l0(geo)?),
        )
    }

    pub fn noise_power_w(&self) -> f64 {
        self.lna_gain * self.boltzmann * self.system_temp_k * self.bandwidth_hz
    }

    /// Received SNR in dB for coefficients `w` toward `(theta, phi)`.
    pub fn received_snr(
        &self,
        geo: &SatGeometry,
        w: &DMatrix<Complex64>,
        cfg_x: &ArrayConfig,
        cfg_y: &ArrayConfig,
        theta: f64,
        phi: f64,
    ) -> Result<f64> {
        let b = ura_pattern(w, cfg_x, cfg_y, theta, phi)?;
        Ok(lin_to_db(self.snr_from_gain(geo, theta, b.norm_sqr())?))
    }
}
