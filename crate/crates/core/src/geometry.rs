//! Earth/orbit geometry seen from a satellite at nadir-pointing attitude.
//!
//! Angles are off-nadir angles in radians, distances in km, areas in km².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for angles that land a rounding error past the horizon.
const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatGeometry {
    pub altitude_km: f64,
    pub earth_radius_km: f64,
}

impl SatGeometry {
    pub fn new(altitude_km: f64, earth_radius_km: f64) -> Result<Self> {
        if !(altitude_km > 0.0 && altitude_km.is_finite()) {
            return Err(Error::param(format!(
                "altitude must be positive, got {altitude_km}"
            )));
        }
        if !(earth_radius_km > 0.0 && earth_radius_km.is_finite()) {
            return Err(Error::param(format!(
                "earth radius must be positive, got {earth_radius_km}"
            )));
        }
        Ok(Self {
            altitude_km,
            earth_radius_km,
        })
    }

    fn orbit_radius(&self) -> f64 {
        self.altitude_km + self.earth_radius_km
    }

    /// Off-nadir angle of the Earth tangent direction.
    pub fn fov_angle(&self) -> f64 {
        (self.earth_radius_km / self.orbit_radius()).asin()
    }

    fn check_angle(&self, theta: f64) -> Result<f64> {
        let edge = self.fov_angle();
        if !(theta >= -ANGLE_SLACK && theta <= edge + ANGLE_SLACK) {
            return Err(Error::domain(format!(
                "off-nadir angle {:.6} deg outside [0, {:.6}] deg",
                theta.to_degrees(),
                edge.to_degrees()
            )));
        }
        Ok(theta.clamp(0.0, edge))
    }

    /// Distance from the satellite to the ground point seen at `theta`.
    pub fn slant_range(&self, theta: f64) -> Result<f64> {
        let theta = self.check_angle(theta)?;
        let r = self.orbit_radius();
        let re = self.earth_radius_km;
        let disc = (re * re - r * r * theta.sin().powi(2)).max(0.0);
        Ok(r * theta.cos() - disc.sqrt())
    }

    /// Isoflux mask: slant range normalised by altitude.
    pub fn isoflux_sigma(&self, theta: f64) -> Result<f64> {
        Ok(self.slant_range(theta)? / self.altitude_km)
    }

    /// Earth-centre angle between nadir and the ground point seen at `theta`.
    pub fn central_angle(&self, theta: f64) -> Result<f64> {
        let theta = self.check_angle(theta)?;
        let s = (self.orbit_radius() / self.earth_radius_km * theta.sin()).min(1.0);
        // zeta = pi - asin(s) is the obtuse angle at the ground point
        let zeta = std::f64::consts::PI - s.asin();
        Ok(std::f64::consts::PI - theta - zeta)
    }

    fn cap_from_central(&self, phi: f64) -> f64 {
        let re = self.earth_radius_km;
        // 1 - cos(phi) written to avoid cancellation near nadir
        4.0 * std::f64::consts::PI * re * re * (phi / 2.0).sin().powi(2)
    }

    /// Area of the spherical cap covered by the cone of half-angle `theta`.
    pub fn cap_area(&self, theta: f64) -> Result<f64> {
        Ok(self.cap_from_central(self.central_angle(theta)?))
    }

    /// Footprint estimate for a beam of 3 dB width `bw3db` steered to `theta_t`.
    ///
    /// The inner edge is clamped at nadir, so an unsteered beam reduces to the
    /// cap of half-angle `bw3db / 2`.
    pub fn steered_footprint_area(&self, theta_t: f64, bw3db: f64) -> Result<f64> {
        if !(theta_t >= 0.0) || !(bw3db >= 0.0) {
            return Err(Error::domain(format!(
                "steering angle and beamwidth must be nonnegative, got {theta_t} and {bw3db}"
            )));
        }
        let theta1 = (theta_t - bw3db / 2.0).max(0.0);
        let theta2 = theta_t + bw3db / 2.0;
        let phi1 = self.central_angle(theta1)?;
        let phi2 = self.central_angle(theta2)?;
        Ok(self.cap_from_central(phi2 - phi1))
    }
}
