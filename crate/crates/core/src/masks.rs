//! Linear-array angle sets, the linear-array isoflux mask and the sampling
//! grids that become solver constraints.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SatGeometry;

/// Angle sets and floors for one linear-array subproblem. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Half-width of the service main lobe.
    pub theta_svc: f64,
    /// Inner edge of the linear-array sidelobe set.
    pub theta_s_star: f64,
    /// Outer edge of the sidelobe set (the FoV angle).
    pub theta_e: f64,
    /// Constraint grid step.
    pub delta: f64,
    pub snr_min_db: f64,
    /// Main-lobe floor applied to the squared pattern.
    pub alpha: f64,
}

/// Inner sidelobe edge of a linear cut given the planar sidelobe edge.
pub fn sidelobe_inner_edge(theta_s: f64) -> Result<f64> {
    if !(theta_s > 0.0 && theta_s < std::f64::consts::FRAC_PI_2) {
        return Err(Error::domain(format!(
            "sidelobe edge must lie in (0, 90) deg, got {} deg",
            theta_s.to_degrees()
        )));
    }
    Ok((theta_s.sin() / std::f64::consts::SQRT_2).asin())
}

/// Inverse of [`sidelobe_inner_edge`]: the planar sidelobe edge.
pub fn planar_sidelobe_edge(theta_s_star: f64) -> Result<f64> {
    let s = std::f64::consts::SQRT_2 * theta_s_star.sin();
    if !(theta_s_star > 0.0 && s < 1.0) {
        return Err(Error::domain(format!(
            "inner sidelobe edge {} deg has no planar counterpart",
            theta_s_star.to_degrees()
        )));
    }
    Ok(s.asin())
}

impl DesignSpec {
    pub fn new(
        theta_svc: f64,
        theta_s_star: f64,
        theta_e: f64,
        delta: f64,
        snr_min_db: f64,
        alpha: f64,
    ) -> Result<Self> {
        let spec = Self {
            theta_svc,
            theta_s_star,
            theta_e,
            delta,
            snr_min_db,
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            theta_svc,
            theta_s_star,
            theta_e,
            delta,
            alpha,
            ..
        } = *self;
        if !(theta_svc > 0.0) {
            return Err(Error::param("service half-width must be positive"));
        }
        if theta_svc > std::f64::consts::FRAC_PI_4 {
            return Err(Error::param("service half-width must not exceed 45 deg"));
        }
        if theta_svc > theta_s_star {
            return Err(Error::param(format!(
                "service half-width {:.4} deg exceeds sidelobe edge {:.4} deg",
                theta_svc.to_degrees(),
                theta_s_star.to_degrees()
            )));
        }
        if !(theta_s_star < theta_e) {
            return Err(Error::param(
                "sidelobe edge must be inside the field of view",
            ));
        }
        if (std::f64::consts::SQRT_2 * theta_svc.sin()).asin() > theta_e {
            return Err(Error::param(
                "main-lobe mask reaches past the field of view",
            ));
        }
        if !(delta > 0.0) {
            return Err(Error::param("grid step must be positive"));
        }
        if delta > theta_e - theta_s_star {
            return Err(Error::param(format!(
                "grid step {:.4} deg exceeds sidelobe span {:.4} deg",
                delta.to_degrees(),
                (theta_e - theta_s_star).to_degrees()
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param(
                "main-lobe floor must be finite and nonnegative",
            ));
        }
        Ok(())
    }

    /// Same angle sets sampled with a different step.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let spec = Self { delta, ..*self };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Main,
    Side,
    Transition,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Main => "main",
            Region::Side => "side",
            Region::Transition => "transition",
        }
    }
}

pub fn region_of(spec: &DesignSpec, vartheta: f64) -> Region {
    let a = vartheta.abs();
    if a <= spec.theta_svc {
        Region::Main
    } else if a >= spec.theta_s_star {
        Region::Side
    } else {
        Region::Transition
    }
}

/// Linear-array mask value at `vartheta`.
pub fn ula_mask(spec: &DesignSpec, geo: &SatGeometry, vartheta: f64) -> Result<f64> {
    let a = vartheta.abs();
    if a > spec.theta_e + 1e-12 {
        return Err(Error::domain(format!(
            "angle {} deg beyond the field of view",
            vartheta.to_degrees()
        )));
    }
    match region_of(spec, vartheta) {
        Region::Main => {
            let planar = (std::f64::consts::SQRT_2 * a.sin()).min(1.0).asin();
            geo.isoflux_sigma(planar)
        }
        Region::Side => geo.isoflux_sigma(a),
        Region::Transition => Ok(1.0),
    }
}

/// `n + 1` equispaced points on `[lo, hi]`, both endpoints exact.
fn segment(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |k| {
        if k == n {
            hi
        } else {
            lo + (hi - lo) * (k as f64 / n as f64)
        }
    })
}

fn intervals(span: f64, delta: f64) -> usize {
    ((span / delta).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrids {
    pub mainlobe_angles: Vec<f64>,
    pub mainlobe_mask: Vec<f64>,
    pub sidelobe_angles: Vec<f64>,
    pub sidelobe_mask: Vec<f64>,
}

impl SampledGrids {
    pub fn n_svc(&self) -> usize {
        self.mainlobe_angles.len()
    }

    pub fn n_s(&self) -> usize {
        self.sidelobe_angles.len()
    }
}

/// Uniform grids over the main-lobe and sidelobe sets.
///
/// Interval counts are rounded to the nearest integer so that both ends of
/// every segment are sampled even when the span is not a multiple of `delta`.
pub fn build_grids(spec: &DesignSpec, geo: &SatGeometry) -> Result<SampledGrids> {
    spec.validate()?;
    let n_main = intervals(2.0 * spec.theta_svc, spec.delta);
    let mainlobe_angles: Vec<f64> = segment(-spec.theta_svc, spec.theta_svc, n_main).collect();

    let n_side = intervals(spec.theta_e - spec.theta_s_star, spec.delta);
    let sidelobe_angles: Vec<f64> = segment(-spec.theta_e, -spec.theta_s_star, n_side)
        .chain(segment(spec.theta_s_star, spec.theta_e, n_side))
        .collect();

    let mask = |angles: &[f64]| -> Result<Vec<f64>> {
        angles.iter().map(|&v| ula_mask(spec, geo, v)).collect()
    };
    Ok(SampledGrids {
        mainlobe_mask: mask(&mainlobe_angles)?,
        sidelobe_mask: mask(&sidelobe_angles)?,
        mainlobe_angles,
        sidelobe_angles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSample {
    pub angle: f64,
    pub value: f64,
    pub region: Region,
}

/// Mask sampled over the whole field of view, for export.
pub fn mask_table(spec: &DesignSpec, geo: &SatGeometry, step: f64) -> Result<Vec<MaskSample>> {
    if !(step > 0.0) {
        return Err(Error::param("table step must be positive"));
    }
    let n = intervals(2.0 * spec.theta_e, step);
    segment(-spec.theta_e, spec.theta_e, n)
        .map(|angle| {
            Ok(MaskSample {
                angle,
                value: ula_mask(spec, geo, angle)?,
                region: region_of(spec, angle),
            })
        })
        .collect()
}

pub fn write_mask_csv<W: Write>(samples: &[MaskSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle_deg", "mask_value", "region"])?;
    for s in samples {
        w.write_record([
            s.angle.to_degrees().to_string(),
            s.value.to_string(),
            s.region.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leo() -> SatGeometry {
        SatGeometry::new(550.0, 6370.0).unwrap()
    }

    fn spec(svc: f64, star: f64, geo: &SatGeometry) -> DesignSpec {
        DesignSpec::new(
            svc.to_radians(),
            star.to_radians(),
            geo.fov_angle(),
            0.1f64.to_radians(),
            11.0,
            179.35,
        )
        .unwrap()
    }

    #[test]
    fn inner_edge_cases() {
        assert!(sidelobe_inner_edge(std::f64::consts::FRAC_PI_2).is_err());
        let e = sidelobe_inner_edge(89.999999f64.to_radians()).unwrap();
        assert!((e.to_degrees() - 45.0).abs() < 1e-4);
        let ts = planar_sidelobe_edge(10f64.to_radians()).unwrap();
        let back = sidelobe_inner_edge(ts).unwrap();
        assert!((back.to_degrees() - 10.0).abs() < 1e-12);
        let shrunk = sidelobe_inner_edge(35f64.to_radians()).unwrap();
        assert!(shrunk < 35f64.to_radians());
        assert!(sidelobe_inner_edge(0.0).is_err());
    }

    #[test]
    fn mask_values() {
        let g = leo();
        let s = spec(5.0, 10.0, &g);
        assert_eq!(ula_mask(&s, &g, 0.0).unwrap(), 1.0);
        let edge = ula_mask(&s, &g, g.fov_angle()).unwrap();
        assert!((edge - 4.916).abs() < 1e-3);
        assert_eq!(ula_mask(&s, &g, 7f64.to_radians()).unwrap(), 1.0);
        assert!(ula_mask(&s, &g, 1.2).is_err());
        // main branch follows the 45 deg cut of the planar mask
        let v = 4f64.to_radians();
        let planar = (2f64.sqrt() * v.sin()).asin();
        assert_eq!(
            ula_mask(&s, &g, v).unwrap(),
            g.isoflux_sigma(planar).unwrap()
        );
    }

    #[test]
    fn grid_counts() {
        let g = leo();
        let grids = build_grids(&spec(5.0, 10.0, &g), &g).unwrap();
        assert_eq!(grids.n_svc(), 101);
        assert_eq!(grids.mainlobe_angles[50], 0.0);
        // a geometry whose horizon sits just past 67 deg
        let g2 = SatGeometry::new(548.0, 6370.0).unwrap();
        let s2 = DesignSpec::new(
            30f64.to_radians(),
            35f64.to_radians(),
            67f64.to_radians(),
            0.1f64.to_radians(),
            -2.0,
            40.15,
        )
        .unwrap();
        let grids2 = build_grids(&s2, &g2).unwrap();
        assert_eq!(grids2.n_s(), 642);
        assert_eq!(grids2.sidelobe_angles[0], -s2.theta_e);
        assert_eq!(grids2.sidelobe_angles[320], -s2.theta_s_star);
        assert_eq!(grids2.sidelobe_angles[321], s2.theta_s_star);
        assert_eq!(*grids2.sidelobe_angles.last().unwrap(), s2.theta_e);
    }

    #[test]
    fn coarse_grid_is_three_points() {
        let g = leo();
        let s = DesignSpec::new(
            5f64.to_radians(),
            10f64.to_radians(),
            g.fov_angle(),
            5f64.to_radians(),
            0.0,
            1.0,
        )
        .unwrap();
        let grids = build_grids(&s, &g).unwrap();
        assert_eq!(grids.mainlobe_angles, vec![-s.theta_svc, 0.0, s.theta_svc]);
    }

    #[test]
    fn rejects_oversized_step() {
        let g = leo();
        let s = spec(5.0, 10.0, &g);
        assert!(s.with_delta(60f64.to_radians()).is_err());
        assert!(DesignSpec::new(0.2, 0.1, 1.0, 0.01, 0.0, 1.0).is_err());
    }

    #[test]
    fn csv_export() {
        let g = leo();
        let s = spec(5.0, 10.0, &g);
        let table = mask_table(&s, &g, 1f64.to_radians()).unwrap();
        let mut buf = Vec::new();
        write_mask_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("angle_deg,mask_value,region\n"));
        assert!(text.contains(",transition\n"));
        assert_eq!(text.lines().count(), table.len() + 1);
    }

    proptest! {
        #[test]
        fn mask_is_even_and_bounded(frac in -1.0f64..=1.0, svc in 1.0f64..30.0, gap in 0.5f64..10.0) {
            let g = leo();
            let s = spec(svc, svc + gap, &g);
            let v = frac * s.theta_e;
            let a = ula_mask(&s, &g, v).unwrap();
            prop_assert_eq!(a, ula_mask(&s, &g, -v).unwrap());
            prop_assert!(a >= 1.0);
            prop_assert!(a <= g.isoflux_sigma(g.fov_angle()).unwrap() + 1e-12);
            if region_of(&s, v) == Region::Side {
                prop_assert_eq!(a, g.isoflux_sigma(v.abs()).unwrap());
            }
        }
    }
}
