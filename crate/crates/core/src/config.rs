//! Run configuration: a JSON document with one block per subsystem. Angles
//! are in degrees, powers in W, ratios in dB. Missing blocks take the
//! defaults of the reference LEO scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beampattern::ArrayConfig;
use crate::capacity::{AreaProvider, SteeredArea};
use crate::error::{Error, Result};
use crate::geometry::SatGeometry;
use crate::linkbudget::{system_temperature, LinkBudget, Losses, BOLTZMANN, SPEED_OF_LIGHT};
use crate::masks::DesignSpec;
use crate::solver::{IpmSettings, PenaltyParams};
use crate::units::db_to_lin;

/// JSON schema of [`RunConfig`], shipped with the binary.
pub const SCHEMA: &str = include_str!("../configs/schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub altitude_km: f64,
    pub earth_radius_km: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            altitude_km: 550.0,
            earth_radius_km: 6370.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossesConfig {
    pub cable_tx_db: f64,
    pub cable_rx_db: f64,
    pub atmospheric_db: f64,
    pub shadowing_db: f64,
    pub scintillation_db: f64,
}

impl Default for LossesConfig {
    fn default() -> Self {
        Self {
            cable_tx_db: 1.0,
            cable_rx_db: 1.0,
            atmospheric_db: 0.5,
            shadowing_db: 0.0,
            scintillation_db: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudgetConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub pa_gain_db: f64,
    pub rx_gain_dbi: f64,
    pub lna_gain_db: f64,
    pub g_over_t_db_k: f64,
    pub antenna_temp_k: f64,
    pub noise_figure_db: f64,
    pub reference_temp_k: f64,
    /// Overrides the temperature derived from the noise figure.
    pub system_temp_k: Option<f64>,
    pub losses: LossesConfig,
    pub pa_max_w: f64,
    pub pa_backoff_db: f64,
    /// Overrides the average PA power derived from `pa_max_w` and the backoff.
    pub pa_avg_w: Option<f64>,
    pub subarray: [usize; 2],
    pub rf_chains: [usize; 2],
    pub boltzmann: f64,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 12.0,
            bandwidth_mhz: 500.0,
            pa_gain_db: 30.0,
            rx_gain_dbi: 39.7,
            lna_gain_db: 30.0,
            g_over_t_db_k: 16.0,
            antenna_temp_k: 150.0,
            noise_figure_db: 1.2,
            reference_temp_k: 290.0,
            system_temp_k: None,
            losses: LossesConfig::default(),
            pa_max_w: 2.0,
            pa_backoff_db: 5.0,
            pa_avg_w: Some(0.63),
            subarray: [8, 8],
            rf_chains: [4, 4],
            boltzmann: BOLTZMANN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayBlock {
    pub elements_x: usize,
    pub elements_y: usize,
    pub spacing_wavelengths: f64,
}

impl Default for ArrayBlock {
    fn default() -> Self {
        Self {
            elements_x: 32,
            elements_y: 32,
            spacing_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Full service beamwidth; the main-lobe set is `±beamwidth/2`.
    pub beamwidth_deg: f64,
    /// Inner edge of the linear-array sidelobe set.
    pub sidelobe_edge_deg: f64,
    pub grid_step_deg: f64,
    pub snr_min_db: f64,
    /// Replaces the floor derived from `snr_min_db`.
    pub alpha: Option<f64>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            beamwidth_deg: 10.0,
            sidelobe_edge_deg: 10.0,
            grid_step_deg: 0.1,
            snr_min_db: 11.0,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Zero,
    Chirp,
    /// Coefficient CSV with `index,re,im` columns.
    File(PathBuf),
}

impl std::str::FromStr for InitConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitConfig::Zero),
            "chirp" => Ok(InitConfig::Chirp),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(InitConfig::File(path.into())),
                _ => Err(Error::Config(format!(
                    "init must be zero, chirp or file:PATH, got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpmConfig {
    pub max_iter: usize,
    pub feastol: f64,
    pub reltol: f64,
    pub abstol: f64,
    pub relaxed_tol: f64,
}

impl Default for IpmConfig {
    fn default() -> Self {
        let s = IpmSettings::default();
        Self {
            max_iter: s.max_iter,
            feastol: s.feastol,
            reltol: s.reltol,
            abstol: s.abstol,
            relaxed_tol: s.relaxed_tol,
        }
    }
}

impl IpmConfig {
    pub fn settings(&self) -> IpmSettings {
        IpmSettings {
            max_iter: self.max_iter,
            feastol: self.feastol,
            reltol: self.reltol,
            abstol: self.abstol,
            relaxed_tol: self.relaxed_tol,
            ..IpmSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rho0: f64,
    pub p: f64,
    pub kappa: f64,
    pub eps_rank: f64,
    pub max_iter: usize,
    pub init: InitConfig,
    pub ipm: IpmConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PenaltyParams::default();
        Self {
            rho0: p.rho0,
            p: p.p,
            kappa: p.kappa,
            eps_rank: p.eps_rank,
            max_iter: p.max_iter,
            init: InitConfig::Zero,
            ipm: IpmConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn penalty(&self) -> PenaltyParams {
        PenaltyParams {
            rho0: self.rho0,
            p: self.p,
            kappa: self.kappa,
            eps_rank: self.eps_rank,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Off-nadir step of the metric grids; a quarter of the design step when absent.
    pub grid_step_deg: Option<f64>,
    pub phi_step_deg: f64,
    /// Off-nadir step of the exported planar pattern.
    pub plot_theta_step_deg: f64,
    pub plot_phi_step_deg: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            grid_step_deg: None,
            phi_step_deg: 1.0,
            plot_theta_step_deg: 0.25,
            plot_phi_step_deg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub beamwidths_deg: Vec<f64>,
    pub snr_b_db: Vec<f64>,
    pub area_provider: AreaProvider,
    /// Explicit broadened areas; replace the provider when present.
    pub areas_broad_km2: Option<Vec<f64>>,
    /// Explicit narrow-beam areas; replace the provider when present.
    pub areas_narrow: Option<Vec<SteeredArea>>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            beamwidths_deg: vec![10.0, 30.0, 60.0],
            snr_b_db: vec![11.0, 5.0, -2.0],
            area_provider: AreaProvider::Tabulated,
            areas_broad_km2: None,
            areas_narrow: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub link_budget: LinkBudgetConfig,
    pub array: ArrayBlock,
    pub design: DesignConfig,
    pub solver: SolverConfig,
    pub evaluation: EvaluationConfig,
    pub capacity: CapacityConfig,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a config document. Errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Loads and validates a config file. Relative file references resolve
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let InitConfig::File(p) = &cfg.solver.init {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.solver.init = InitConfig::File(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.geometry().map_err(wrap)?;
        self.link_budget().map_err(wrap)?;
        self.arrays().map_err(wrap)?;
        self.design_spec().map_err(wrap)?;
        self.solver.penalty().validate().map_err(wrap)?;
        let ev = &self.evaluation;
        for (name, v) in [
            ("evaluation.phi_step_deg", ev.phi_step_deg),
            ("evaluation.plot_theta_step_deg", ev.plot_theta_step_deg),
            ("evaluation.plot_phi_step_deg", ev.plot_phi_step_deg),
            ("evaluation.grid_step_deg", ev.grid_step_deg.unwrap_or(1.0)),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if let InitConfig::File(p) = &self.solver.init {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "initializer file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<SatGeometry> {
        SatGeometry::new(self.geometry.altitude_km, self.geometry.earth_radius_km)
    }

    pub fn link_budget(&self) -> Result<LinkBudget> {
        let c = &self.link_budget;
        let system_temp_k = c.system_temp_k.unwrap_or_else(|| {
            system_temperature(c.antenna_temp_k, c.noise_figure_db, c.reference_temp_k)
        });
        let mut budget = LinkBudget {
            carrier_hz: c.carrier_ghz * 1e9,
            bandwidth_hz: c.bandwidth_mhz * 1e6,
            pa_gain: db_to_lin(c.pa_gain_db),
            rx_gain: db_to_lin(c.rx_gain_dbi),
            lna_gain: db_to_lin(c.lna_gain_db),
            g_over_t: db_to_lin(c.g_over_t_db_k),
            system_temp_k,
            losses: Losses::from_db(
                c.losses.cable_tx_db,
                c.losses.cable_rx_db,
                c.losses.atmospheric_db,
                c.losses.shadowing_db,
                c.losses.scintillation_db,
            ),
            source_power_w: 1.0,
            subarray: c.subarray,
            rf_chains: c.rf_chains,
            boltzmann: c.boltzmann,
            speed_of_light: SPEED_OF_LIGHT,
        };
        let pa = match c.pa_avg_w {
            Some(avg) => budget.pa_from_average(avg)?,
            None => budget.ps_from_pa(c.pa_max_w, c.pa_backoff_db)?,
        };
        budget.source_power_w = pa.source_power_w;
        budget.validate()?;
        Ok(budget)
    }

    /// Array configurations along x and y.
    pub fn arrays(&self) -> Result<(ArrayConfig, ArrayConfig)> {
        let a = &self.array;
        let carrier = self.link_budget.carrier_ghz * 1e9;
        Ok((
            ArrayConfig::new(a.elements_x, a.spacing_wavelengths, carrier)?,
            ArrayConfig::new(a.elements_y, a.spacing_wavelengths, carrier)?,
        ))
    }

    /// Floor on the squared linear-array pattern: the configured override or
    /// the value implied by `snr_min_db`.
    pub fn alpha(&self) -> Result<f64> {
        match self.design.alpha {
            Some(a) => Ok(a),
            None => self
                .link_budget()?
                .alpha_floor(&self.geometry()?, self.design.snr_min_db),
        }
    }

    pub fn design_spec(&self) -> Result<DesignSpec> {
        let d = &self.design;
        let geo = self.geometry()?;
        DesignSpec::new(
            (d.beamwidth_deg / 2.0).to_radians(),
            d.sidelobe_edge_deg.to_radians(),
            geo.fov_angle(),
            d.grid_step_deg.to_radians(),
            d.snr_min_db,
            self.alpha()?,
        )
    }

    /// Metric grid step in radians.
    pub fn evaluation_step(&self) -> f64 {
        self.evaluation
            .grid_step_deg
            .unwrap_or(self.design.grid_step_deg / 4.0)
            .to_radians()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_floors() {
        let mut cfg = RunConfig::default();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        for (snr, alpha) in [(11.0, 179.35), (5.0, 89.89), (-2.0, 40.15)] {
            cfg.design.snr_min_db = snr;
            assert!(rel(cfg.alpha().unwrap(), alpha) < 0.005);
        }
        let ps = cfg.link_budget().unwrap().source_power_w;
        assert!((ps - 9.84e-6).abs() < 1e-8);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = RunConfig::from_json("{\"design\": {\"beamwidth\": 10}}").unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err =
            RunConfig::from_json("{\n  \"design\": {\n    \"beamwidth_deg\": ,\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn init_parsing() {
        assert_eq!("zero".parse::<InitConfig>().unwrap(), InitConfig::Zero);
        assert_eq!("chirp".parse::<InitConfig>().unwrap(), InitConfig::Chirp);
        assert_eq!(
            "file:a.csv".parse::<InitConfig>().unwrap(),
            InitConfig::File("a.csv".into())
        );
        assert!("file:".parse::<InitConfig>().is_err());
        assert!("random".parse::<InitConfig>().is_err());
        let cfg = RunConfig::from_json("{\"solver\": {\"init\": {\"file\": \"x.csv\"}}}").unwrap();
        assert_eq!(cfg.solver.init, InitConfig::File("x.csv".into()));
    }

    #[test]
    fn invalid_design_rejected() {
        let mut cfg = RunConfig::default();
        cfg.design.sidelobe_edge_deg = 2.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn schema_is_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        assert_eq!(v["type"], "object");
    }
}
