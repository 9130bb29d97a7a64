//! End-to-end runs behind the command-line subcommands, and the CSV/JSON
//! artifacts they produce.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beampattern::{ura_magnitudes, ArrayConfig, PatternGrid};
use crate::capacity::{
    bw3db, capacities, steering_angles_deg, write_capacity_csv, CapacityInputs, CapacityReport,
    SteeredArea,
};
use crate::config::{InitConfig, RunConfig};
use crate::error::{Error, Result};
use crate::masks::{mask_table, ula_mask, write_mask_csv, DesignSpec};
use crate::metrics::{planar_grid, Evaluator, MetricsReport};
use crate::solver::init::chirp;
use crate::solver::{compose_ura, run, CoefficientSet, Init, SolveReport, UlaProblem};

/// Coefficient vector row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct VectorRow {
    index: usize,
    re: f64,
    im: f64,
    #[serde(default)]
    modulus: Option<f64>,
    #[serde(default)]
    phase_deg: Option<f64>,
}

/// Coefficient matrix row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct MatrixRow {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
    #[serde(default)]
    modulus: Option<f64>,
    #[serde(default)]
    phase_deg: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn write_vector_csv<W: Write>(x: &DVector<Complex64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (index, v) in x.iter().enumerate() {
        w.serialize(VectorRow {
            index,
            re: v.re,
            im: v.im,
            modulus: Some(v.norm()),
            phase_deg: Some(v.arg().to_degrees()),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv<R: Read>(input: R) -> Result<DVector<Complex64>> {
    let mut rows: Vec<VectorRow> = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.index);
    for (k, r) in rows.iter().enumerate() {
        if r.index != k {
            return Err(Error::Config(format!(
                "coefficient indices must run 0..{}, found {} at position {k}",
                rows.len(),
                r.index
            )));
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("coefficient file has no rows".into()));
    }
    Ok(DVector::from_iterator(
        rows.len(),
        rows.iter().map(|r| Complex64::new(r.re, r.im)),
    ))
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<Complex64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let v = m[(row, col)];
            w.serialize(MatrixRow {
                row,
                col,
                re: v.re,
                im: v.im,
                modulus: Some(v.norm()),
                phase_deg: Some(v.arg().to_degrees()),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `rows × cols` coefficient matrix; every entry must appear once.
pub fn read_matrix_csv<R: Read>(input: R, rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    let mut m = DMatrix::zeros(rows, cols);
    let mut seen = vec![false; rows * cols];
    let mut count = 0usize;
    for rec in csv::Reader::from_reader(input).deserialize() {
        let r: MatrixRow = rec?;
        if r.row >= rows || r.col >= cols {
            return Err(Error::Config(format!(
                "entry ({}, {}) outside the configured {rows}x{cols} array",
                r.row, r.col
            )));
        }
        let k = r.row * cols + r.col;
        if seen[k] {
            return Err(Error::Config(format!(
                "entry ({}, {}) appears twice",
                r.row, r.col
            )));
        }
        seen[k] = true;
        count += 1;
        m[(r.row, r.col)] = Complex64::new(r.re, r.im);
    }
    if count != rows * cols {
        return Err(Error::Dimension {
            expected: rows * cols,
            got: count,
        });
    }
    Ok(m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Starting point for one axis.
pub fn initializer(cfg: &RunConfig, array: &ArrayConfig, spec: &DesignSpec) -> Result<Init> {
    match &cfg.solver.init {
        InitConfig::Zero => Ok(Init::Zero),
        InitConfig::Chirp => Ok(Init::Vector(chirp(
            array.elements,
            array.spacing_wavelengths,
            spec.theta_svc,
        )?)),
        InitConfig::File(path) => {
            let x = read_vector_csv(open(path)?)?;
            if x.len() != array.elements {
                return Err(Error::Dimension {
                    expected: array.elements,
                    got: x.len(),
                });
            }
            Ok(Init::Vector(x))
        }
    }
}

fn solve_axis(cfg: &RunConfig, array: ArrayConfig, spec: DesignSpec) -> Result<SolveReport> {
    let geo = cfg.geometry()?;
    let init = initializer(cfg, &array, &spec)?;
    let problem = UlaProblem::new(array, spec, &geo)?;
    run(
        &problem,
        &init,
        &cfg.solver.penalty(),
        &cfg.solver.ipm.settings(),
    )
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub spec: DesignSpec,
    pub x: SolveReport,
    pub y: SolveReport,
    /// Present when both axes converged.
    pub coefficients: Option<CoefficientSet>,
    pub metrics: Option<MetricsReport>,
}

impl DesignOutcome {
    pub fn converged(&self) -> bool {
        self.x.converged && self.y.converged
    }
}

pub fn evaluator(cfg: &RunConfig) -> Result<Evaluator> {
    let (cfg_x, cfg_y) = cfg.arrays()?;
    Ok(Evaluator {
        cfg_x,
        cfg_y,
        spec: cfg.design_spec()?,
        geo: cfg.geometry()?,
        budget: cfg.link_budget()?,
        grid_step: cfg.evaluation_step(),
        phi_step: cfg.evaluation.phi_step_deg.to_radians(),
    })
}

/// Solves both axes and, when they converge, composes and scores `W`.
///
/// Axes with identical arrays share one solve since the subproblems coincide.
pub fn design(cfg: &RunConfig) -> Result<DesignOutcome> {
    cfg.validate()?;
    let spec = cfg.design_spec()?;
    let (ax, ay) = cfg.arrays()?;
    let (x, y) = if ax == ay {
        let r = solve_axis(cfg, ax, spec)?;
        (r.clone(), r)
    } else {
        let (rx, ry) = rayon::join(|| solve_axis(cfg, ax, spec), || solve_axis(cfg, ay, spec));
        (rx?, ry?)
    };
    let (coefficients, metrics) = if x.converged && y.converged {
        let c = compose_ura(&x, &y)?;
        let m = evaluator(cfg)?.evaluate(&c.w, Some((&c.x, &c.y)))?;
        (Some(c), Some(m))
    } else {
        (None, None)
    };
    Ok(DesignOutcome {
        spec,
        x,
        y,
        coefficients,
        metrics,
    })
}

#[derive(Serialize)]
struct AxisSummary<'a> {
    elements: usize,
    eta_cmc: Option<f64>,
    #[serde(flatten)]
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct SolveReportFile<'a> {
    config: &'a RunConfig,
    alpha: f64,
    converged: bool,
    x: AxisSummary<'a>,
    y: AxisSummary<'a>,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config: &'a RunConfig,
    metrics: &'a MetricsReport,
}

#[derive(Serialize)]
struct PatternRow {
    angle_deg: f64,
    magnitude: f64,
    magnitude_db: f64,
    mask_value: f64,
}

#[derive(Serialize)]
struct PlanarRow {
    theta_deg: f64,
    phi_deg: f64,
    magnitude_db: f64,
}

fn write_ula_pattern(
    path: &Path,
    x: &DVector<Complex64>,
    array: &ArrayConfig,
    spec: &DesignSpec,
    cfg: &RunConfig,
) -> Result<()> {
    let geo = cfg.geometry()?;
    let step = cfg.evaluation_step();
    let n = ((2.0 * spec.theta_e / step).round() as usize).max(1);
    let angles: Vec<f64> = (0..=n)
        .map(|i| -spec.theta_e + 2.0 * spec.theta_e * i as f64 / n as f64)
        .collect();
    let mags = PatternGrid::new(array, &angles).magnitudes(x)?;
    let mut w = csv::Writer::from_writer(create(path)?);
    for (&angle, &b) in angles.iter().zip(&mags) {
        w.serialize(PatternRow {
            angle_deg: angle.to_degrees(),
            magnitude: b,
            magnitude_db: 20.0 * b.log10(),
            mask_value: ula_mask(spec, &geo, angle)?,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn write_ura_pattern(path: &Path, c: &CoefficientSet, cfg: &RunConfig) -> Result<()> {
    let (ax, ay) = cfg.arrays()?;
    let ev = &cfg.evaluation;
    let points = planar_grid(
        0.0,
        cfg.geometry()?.fov_angle(),
        ev.plot_theta_step_deg.to_radians(),
        ev.plot_phi_step_deg.to_radians(),
    )?;
    let mags = ura_magnitudes(&c.w, &ax, &ay, &points)?;
    let mut w = csv::Writer::from_writer(create(path)?);
    for (&(theta, phi), &b) in points.iter().zip(&mags) {
        w.serialize(PlanarRow {
            theta_deg: theta.to_degrees(),
            phi_deg: phi.to_degrees(),
            magnitude_db: 20.0 * b.log10(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes all design artifacts into `out`.
///
/// The solve report and the best-iterate coefficient vectors are always
/// written; the planar coefficients, metrics and patterns only after
/// convergence.
pub fn write_design(cfg: &RunConfig, outcome: &DesignOutcome, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let (ax, ay) = cfg.arrays()?;
    let eta = |r: &SolveReport| crate::units::finite_or_none(r.eta_cmc());
    write_json(
        &out.join("solve_report.json"),
        &SolveReportFile {
            config: cfg,
            alpha: outcome.spec.alpha,
            converged: outcome.converged(),
            x: AxisSummary {
                elements: ax.elements,
                eta_cmc: eta(&outcome.x),
                report: &outcome.x,
            },
            y: AxisSummary {
                elements: ay.elements,
                eta_cmc: eta(&outcome.y),
                report: &outcome.y,
            },
        },
    )?;
    write_vector_csv(&outcome.x.x_opt, create(&out.join("coefficients_x.csv"))?)?;
    write_vector_csv(&outcome.y.x_opt, create(&out.join("coefficients_y.csv"))?)?;
    let samples = mask_table(&outcome.spec, &cfg.geometry()?, cfg.evaluation_step())?;
    write_mask_csv(&samples, create(&out.join("mask.csv"))?)?;

    if let (Some(c), Some(m)) = (&outcome.coefficients, &outcome.metrics) {
        write_matrix_csv(&c.w, create(&out.join("coefficients_w.csv"))?)?;
        write_json(
            &out.join("metrics.json"),
            &MetricsFile {
                config: cfg,
                metrics: m,
            },
        )?;
        write_ula_pattern(&out.join("pattern_x.csv"), &c.x, &ax, &outcome.spec, cfg)?;
        write_ula_pattern(&out.join("pattern_y.csv"), &c.y, &ay, &outcome.spec, cfg)?;
        write_ura_pattern(&out.join("pattern_ura.csv"), c, cfg)?;
    }
    Ok(())
}

/// Scores a coefficient matrix file without solving.
pub fn evaluate_file(cfg: &RunConfig, coefficients: &Path) -> Result<MetricsReport> {
    cfg.validate()?;
    let (ax, ay) = cfg.arrays()?;
    let w = read_matrix_csv(open(coefficients)?, ax.elements, ay.elements)?;
    evaluator(cfg)?.evaluate(&w, None)
}

pub fn write_metrics(cfg: &RunConfig, metrics: &MetricsReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(
        &out.join("metrics.json"),
        &MetricsFile {
            config: cfg,
            metrics,
        },
    )
}

pub fn capacity_inputs(cfg: &RunConfig) -> Result<CapacityInputs> {
    let c = &cfg.capacity;
    let geo = cfg.geometry()?;
    let a = &cfg.array;
    if a.elements_x != a.elements_y {
        return Err(Error::Config(
            "capacity comparison needs a square array".into(),
        ));
    }
    let areas_broad_km2 = match &c.areas_broad_km2 {
        Some(v) => v.clone(),
        None => c
            .beamwidths_deg
            .iter()
            .map(|&b| c.area_provider.broad_area(&geo, b))
            .collect::<Result<_>>()?,
    };
    let areas_narrow = match &c.areas_narrow {
        Some(v) => v.clone(),
        None => steering_angles_deg(&c.beamwidths_deg)
            .into_iter()
            .map(|t| {
                Ok(SteeredArea {
                    theta_t_deg: t,
                    area_km2: c.area_provider.narrow_area(
                        &geo,
                        a.elements_x,
                        a.spacing_wavelengths,
                        t,
                    )?,
                })
            })
            .collect::<Result<_>>()?,
    };
    let inputs = CapacityInputs {
        elements: a.elements_x,
        spacing_wavelengths: a.spacing_wavelengths,
        beamwidths_deg: c.beamwidths_deg.clone(),
        snr_b_db: c.snr_b_db.clone(),
        areas_broad_km2,
        areas_narrow,
    };
    inputs.validate()?;
    Ok(inputs)
}

pub fn capacity(cfg: &RunConfig) -> Result<CapacityReport> {
    cfg.validate()?;
    let inputs = capacity_inputs(cfg)?;
    capacities(&inputs, &cfg.link_budget()?, &cfg.geometry()?)
}

#[derive(Serialize)]
struct CapacityFile<'a> {
    config: &'a RunConfig,
    inputs: &'a CapacityInputs,
    report: &'a CapacityReport,
}

pub fn write_capacity(cfg: &RunConfig, report: &CapacityReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let inputs = capacity_inputs(cfg)?;
    write_json(
        &out.join("capacity.json"),
        &CapacityFile {
            config: cfg,
            inputs: &inputs,
            report,
        },
    )?;
    write_capacity_csv(report, create(&out.join("capacity.csv"))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamwidthGeometry {
    pub beamwidth_deg: f64,
    pub cap_area_km2: f64,
    pub edge_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub fov_angle_deg: f64,
    pub edge_slant_range_km: f64,
    pub edge_sigma: f64,
    pub l0_db: f64,
    pub alpha: f64,
    pub source_power_w: f64,
    pub bw3db_deg: Option<f64>,
    pub nadir_footprint_km2: Option<f64>,
    pub beamwidths: Vec<BeamwidthGeometry>,
}

pub fn geometry(cfg: &RunConfig) -> Result<GeometryReport> {
    cfg.validate()?;
    let geo = cfg.geometry()?;
    let budget = cfg.link_budget()?;
    let fov = geo.fov_angle();
    let a = &cfg.array;
    let bw = bw3db(a.elements_x, a.spacing_wavelengths).ok();
    let beamwidths = cfg
        .capacity
        .beamwidths_deg
        .iter()
        .map(|&b| {
            let half = (b / 2.0).to_radians();
            Ok(BeamwidthGeometry {
                beamwidth_deg: b,
                cap_area_km2: geo.cap_area(half)?,
                edge_sigma: geo.isoflux_sigma(half)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GeometryReport {
        fov_angle_deg: fov.to_degrees(),
        edge_slant_range_km: geo.slant_range(fov)?,
        edge_sigma: geo.isoflux_sigma(fov)?,
        l0_db: budget.l0_db(&geo)?,
        alpha: cfg.alpha()?,
        source_power_w: budget.source_power_w,
        bw3db_deg: bw.map(f64::to_degrees),
        nadir_footprint_km2: bw.map(|b| geo.steered_footprint_area(0.0, b)).transpose()?,
        beamwidths,
    })
}

#[derive(Serialize)]
struct GeometryFile<'a> {
    config: &'a RunConfig,
    geometry: &'a GeometryReport,
}

pub fn write_geometry(cfg: &RunConfig, report: &GeometryReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(
        &out.join("geometry.json"),
        &GeometryFile {
            config: cfg,
            geometry: report,
        },
    )?;
    let spec = cfg.design_spec()?;
    let samples = mask_table(&spec, &cfg.geometry()?, cfg.evaluation_step())?;
    write_mask_csv(&samples, create(&out.join("mask.csv"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_csv_round_trip() {
        let x = DVector::from_fn(5, |m, _| {
            Complex64::from_polar(1.0 + m as f64 * 0.1, 0.37 * m as f64)
        });
        let mut buf = Vec::new();
        write_vector_csv(&x, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,re,im,modulus,phase_deg\n"));
        assert_eq!(read_vector_csv(buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn matrix_csv_round_trip_and_truncation() {
        let w = DMatrix::from_fn(3, 4, |r, c| Complex64::new(r as f64 + 0.1, c as f64 - 0.7));
        let mut buf = Vec::new();
        write_matrix_csv(&w, &mut buf).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice(), 3, 4).unwrap(), w);
        assert!(read_matrix_csv(buf.as_slice(), 4, 4).is_err());
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            read_matrix_csv(truncated.as_bytes(), 3, 4),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn table_capacity_from_default_config() {
        let r = capacity(&RunConfig::default()).unwrap();
        let counts: Vec<usize> = r.rows.iter().map(|row| row.n_min).collect();
        assert_eq!(counts, vec![9, 60, 105]);
    }

    #[test]
    fn empty_beamwidths_rejected() {
        let mut cfg = RunConfig::default();
        cfg.capacity.beamwidths_deg.clear();
        cfg.capacity.snr_b_db.clear();
        assert!(capacity(&cfg).is_err());
    }

    #[test]
    fn geometry_report_values() {
        let r = geometry(&RunConfig::default()).unwrap();
        assert!((r.fov_angle_deg - 66.97).abs() < 0.05);
        assert!((r.l0_db - 171.63).abs() < 0.02);
        assert!((r.nadir_footprint_km2.unwrap() - 786.23).abs() / 786.23 < 0.01);
    }
}
