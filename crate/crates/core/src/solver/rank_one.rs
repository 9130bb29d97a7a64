//! Rank-one penalized iteration for constant-modulus linear-array
//! coefficients, and composition of the planar weights.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::beam::{quadratic_form_row, BeamProgram};
use super::cone::{hermitian_part, CMat};
use super::init::normalize_modulus;
use super::ipm::{self, IpmSettings, IpmStatus};
use crate::beampattern::{steering_vector, ArrayConfig, PatternGrid};
use crate::error::{Error, Result};
use crate::geometry::SatGeometry;
use crate::masks::{build_grids, DesignSpec, SampledGrids};

/// One linear-array design problem with its constraint grid.
#[derive(Debug, Clone)]
pub struct UlaProblem {
    pub array: ArrayConfig,
    pub spec: DesignSpec,
    pub grids: SampledGrids,
    /// Denser grid used only to report constraint violations.
    pub verification: SampledGrids,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

impl UlaProblem {
    pub fn new(array: ArrayConfig, spec: DesignSpec, geo: &SatGeometry) -> Result<Self> {
        let grids = build_grids(&spec, geo)?;
        let verification = build_grids(&spec.with_delta(spec.delta / 4.0)?, geo)?;
        Self::from_grids(array, spec, grids, verification)
    }

    pub fn from_grids(
        array: ArrayConfig,
        spec: DesignSpec,
        grids: SampledGrids,
        verification: SampledGrids,
    ) -> Result<Self> {
        let m = array.elements;
        let (n_s, n_svc) = (grids.n_s(), grids.n_svc());
        let n_l = n_s + n_svc + 1;
        let mut g = DMatrix::zeros(n_l, 2 * m - 1);
        let mut h = DVector::zeros(n_l);
        let mf = m as f64;
        for (k, (&angle, &mask)) in grids
            .sidelobe_angles
            .iter()
            .zip(&grids.sidelobe_mask)
            .enumerate()
        {
            let mut row = quadratic_form_row(m, array.phase_step(angle));
            row[2 * m - 2] = -mask;
            g.set_row(k, &row.transpose());
            h[k] = -mf;
        }
        for (i, (&angle, &mask)) in grids
            .mainlobe_angles
            .iter()
            .zip(&grids.mainlobe_mask)
            .enumerate()
        {
            let row = -quadratic_form_row(m, array.phase_step(angle));
            g.set_row(n_s + i, &row.transpose());
            h[n_s + i] = mf - spec.alpha * mask;
        }
        g[(n_l - 1, 2 * m - 2)] = -1.0;
        Ok(Self {
            array,
            spec,
            grids,
            verification,
            g,
            h,
        })
    }

    pub fn elements(&self) -> usize {
        self.array.elements
    }

    /// `A(ϑ) = a aᴴ`
    pub fn steering_matrix(&self, vartheta: f64) -> CMat {
        let a = steering_vector(&self.array, vartheta);
        &a * a.adjoint()
    }

    /// Minimizes `t + ρ Tr(X V)` over the lifted design set.
    pub fn solve_inner(&self, v: &CMat, rho: f64, settings: &IpmSettings) -> Result<InnerSolution> {
        if !(rho >= 0.0) {
            return Err(Error::param("penalty weight must be non-negative"));
        }
        let m = self.elements();
        let rho_v = v * Complex64::new(rho, 0.0);
        let prog = BeamProgram::new(m, self.g.clone(), self.h.clone(), rho_v)?;
        let sol = ipm::solve(&prog, settings)?;
        match sol.status {
            IpmStatus::Optimal => {
                let (x, t) = prog.design_variables(&sol.y, &sol.z);
                Ok(InnerSolution {
                    x,
                    t,
                    objective: -sol.primal_objective,
                    ipm_iterations: sol.iterations,
                })
            }
            IpmStatus::DualInfeasible => Err(Error::Infeasible(format!(
                "main-lobe floor alpha = {:.4} cannot be met by a {m}-element array",
                self.spec.alpha
            ))),
            IpmStatus::PrimalInfeasible => Err(Error::Numerical(
                "design problem reported unbounded below".into(),
            )),
            IpmStatus::Stall => Err(Error::SolverStall(format!(
                "inner solver stopped after {} iterations with primal residual {:.2e}, \
                 dual residual {:.2e}, gap {:.2e}",
                sol.iterations, sol.primal_residual, sol.dual_residual, sol.gap
            ))),
        }
    }

    /// Worst main-lobe deficit `max(0, sqrt(α σ̃) - |B|)` and sidelobe excess
    /// `max(0, |B| - sqrt(t σ̃))` on the verification grid.
    pub fn violations(&self, x: &DVector<Complex64>, t: f64) -> Result<ConstraintViolations> {
        let v = &self.verification;
        let main = PatternGrid::new(&self.array, &v.mainlobe_angles).magnitudes(x)?;
        let side = PatternGrid::new(&self.array, &v.sidelobe_angles).magnitudes(x)?;
        let mainlobe_deficit = main
            .iter()
            .zip(&v.mainlobe_mask)
            .map(|(b, s)| ((self.spec.alpha * s).sqrt() - b).max(0.0))
            .fold(0.0, f64::max);
        let sidelobe_excess = side
            .iter()
            .zip(&v.sidelobe_mask)
            .map(|(b, s)| (b - (t.max(0.0) * s).sqrt()).max(0.0))
            .fold(0.0, f64::max);
        Ok(ConstraintViolations {
            mainlobe_deficit,
            sidelobe_excess,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub x: CMat,
    pub t: f64,
    /// `t + ρ Tr(X V)`
    pub objective: f64,
    pub ipm_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct EigStep {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub u0: DVector<Complex64>,
    /// `I - u0 u0ᴴ`
    pub v: CMat,
}

/// Rotates `u` so that its first entry of largest magnitude is real positive.
fn normalize_phase(u: &mut DVector<Complex64>) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, c) in u.iter().enumerate() {
        // entries within rounding of the maximum count as ties; keep the first
        if c.norm() > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = c.norm();
        }
    }
    if best_mag > 0.0 {
        let rot = u[best].conj() / best_mag;
        for c in u.iter_mut() {
            *c *= rot;
        }
        u[best] = Complex64::new(u[best].re, 0.0);
    }
}

fn rounded_key(u: &DVector<Complex64>) -> Vec<i64> {
    u.iter()
        .flat_map(|c| [(c.re * 1e9).round() as i64, (c.im * 1e9).round() as i64])
        .collect()
}

pub fn eig_step(x: &CMat) -> Result<EigStep> {
    let m = x.nrows();
    if m == 0 || x.ncols() != m {
        return Err(Error::param("eigen step needs a non-empty square matrix"));
    }
    if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numerical(
            "non-finite entries in lifted matrix".into(),
        ));
    }
    let eig = hermitian_part(x).symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<Complex64>)> = (0..m)
        .map(|i| {
            let mut u = eig.eigenvectors.column(i).into_owned();
            let n = u.norm();
            u /= Complex64::new(n, 0.0);
            normalize_phase(&mut u);
            (eig.eigenvalues[i], u)
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| rounded_key(&a.1).cmp(&rounded_key(&b.1)))
    });
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let u0 = pairs.swap_remove(0).1;
    let v = hermitian_part(&(CMat::identity(m, m) - &u0 * u0.adjoint()));
    Ok(EigStep {
        lambda0: eigenvalues[0],
        lambda1: eigenvalues.get(1).copied().unwrap_or(0.0),
        eigenvalues,
        u0,
        v,
    })
}

/// Grows `ρ` by `1 + p` when the eigenvalue ratio `Λ0/Λ1` improved by at most `κ`.
pub fn update_penalty(rho: f64, ratio_now: f64, ratio_prev: f64, p: f64, kappa: f64) -> f64 {
    if ratio_now - ratio_prev <= kappa {
        rho * (1.0 + p)
    } else {
        rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyParams {
    pub rho0: f64,
    pub p: f64,
    pub kappa: f64,
    pub eps_rank: f64,
    pub max_iter: usize,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            rho0: 0.1,
            p: 0.1,
            kappa: 5.0,
            eps_rank: 1e-5,
            max_iter: 200,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::param("rho0 must be positive"));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(Error::param("p must be non-negative"));
        }
        if !self.kappa.is_finite() {
            return Err(Error::param("kappa must be finite"));
        }
        if !(self.eps_rank > 0.0 && self.eps_rank < 1.0) {
            return Err(Error::param("eps_rank must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zero,
    Vector(DVector<Complex64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub t: f64,
    pub eig_ratio: f64,
    pub rho: f64,
    pub ipm_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintViolations {
    pub mainlobe_deficit: f64,
    pub sidelobe_excess: f64,
}

/// Why the outer iteration stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `Λ1/Λ0 ≤ ε_rank`.
    RankOne,
    IterationLimit,
    /// The inner solve missed its tolerances after at least one success.
    InnerStall(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub final_eig_ratio: f64,
    pub t_star: f64,
    #[serde(skip)]
    pub x_opt: DVector<Complex64>,
    pub constraint_violations: ConstraintViolations,
    pub params: PenaltyParams,
    pub init_normalized: bool,
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    /// `max |x_m| / min |x_m|`
    pub fn eta_cmc(&self) -> f64 {
        modulus_ratio(self.x_opt.iter())
    }
}

fn modulus_ratio<'a>(it: impl Iterator<Item = &'a Complex64>) -> f64 {
    let (lo, hi) = it.fold((f64::INFINITY, 0.0f64), |(lo, hi), c| {
        (lo.min(c.norm()), hi.max(c.norm()))
    });
    hi / lo
}

/// Runs the penalized iteration until `Λ1/Λ0 ≤ ε_rank` or `max_iter`.
///
/// Without an initial vector the first solve is the plain relaxation and the
/// first penalty update is skipped.
pub fn run(
    problem: &UlaProblem,
    init: &Init,
    params: &PenaltyParams,
    settings: &IpmSettings,
) -> Result<SolveReport> {
    params.validate()?;
    let m = problem.elements();
    let mut rho = params.rho0;
    let mut init_normalized = false;
    let (mut v, mut ratio_prev) = match init {
        Init::Zero => (CMat::zeros(m, m), f64::NAN),
        Init::Vector(x0) => {
            if x0.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: x0.len(),
                });
            }
            let (x0, changed) = normalize_modulus(x0)?;
            init_normalized = changed;
            let e = eig_step(&(&x0 * x0.adjoint()))?;
            (e.v, e.lambda0 / e.lambda1)
        }
    };

    let mut history = Vec::new();
    let mut best: Option<(f64, EigStep, f64)> = None;
    let mut termination = Termination::IterationLimit;
    for iteration in 1..=params.max_iter {
        let inner = match problem.solve_inner(&v, rho, settings) {
            Ok(inner) => inner,
            Err(Error::SolverStall(msg)) if best.is_some() => {
                termination = Termination::InnerStall(format!("iteration {iteration}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let e = eig_step(&inner.x)?;
        let ratio = e.lambda1 / e.lambda0;
        history.push(IterationRecord {
            iteration,
            t: inner.t,
            eig_ratio: ratio,
            rho,
            ipm_iterations: inner.ipm_iterations,
        });
        let improved = best.as_ref().is_none_or(|b| ratio <= b.0);
        let ratio_now = e.lambda0 / e.lambda1;
        let next_v = e.v.clone();
        if improved {
            best = Some((ratio, e, inner.t));
        }
        if ratio <= params.eps_rank {
            termination = Termination::RankOne;
            break;
        }
        v = next_v;
        rho = update_penalty(rho, ratio_now, ratio_prev, params.p, params.kappa);
        ratio_prev = ratio_now;
    }

    let (final_eig_ratio, e, t_star) =
        best.ok_or_else(|| Error::Numerical("no iterations were run".into()))?;
    let x_opt = &e.u0 * Complex64::new(e.lambda0.max(0.0).sqrt(), 0.0);
    let constraint_violations = problem.violations(&x_opt, t_star)?;
    Ok(SolveReport {
        converged: termination == Termination::RankOne,
        termination,
        iterations: history.len(),
        final_eig_ratio,
        t_star,
        x_opt,
        constraint_violations,
        params: *params,
        init_normalized,
        history,
    })
}

/// Planar coefficients `W = x yᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub x: DVector<Complex64>,
    pub y: DVector<Complex64>,
    pub w: DMatrix<Complex64>,
}

impl CoefficientSet {
    pub fn from_vectors(x: DVector<Complex64>, y: DVector<Complex64>) -> Self {
        let w = &x * y.transpose();
        Self { x, y, w }
    }

    pub fn eta_cmc(&self) -> f64 {
        modulus_ratio(self.w.iter())
    }
}

pub fn compose_ura(x_report: &SolveReport, y_report: &SolveReport) -> Result<CoefficientSet> {
    for (axis, r) in [("x", x_report), ("y", y_report)] {
        if !r.converged {
            return Err(Error::NoConvergence(format!(
                "{axis}-axis subproblem stopped after {} iterations at eigenvalue ratio {:.3e}",
                r.iterations, r.final_eig_ratio
            )));
        }
    }
    Ok(CoefficientSet::from_vectors(
        x_report.x_opt.clone(),
        y_report.x_opt.clone(),
    ))
}
