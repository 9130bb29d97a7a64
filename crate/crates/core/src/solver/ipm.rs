//! Primal-dual interior-point method for cone programs
//!
//! ```text
//! minimize cᵀx  subject to  Gx + s = h,  Ax = b,  s ∈ K
//! maximize -hᵀz - bᵀy  subject to  Gᵀz + Aᵀy + c = 0,  z ∈ K
//! ```
//!
//! using the homogeneous self-dual embedding, Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector. The problem supplies the linear maps and a
//! solver for the scaled KKT system
//!
//! ```text
//! [ 0   Aᵀ  Gᵀ   ] [ux]   [bx]
//! [ A   0   0    ] [uy] = [by]
//! [ G   0  -WᵀW  ] [uz]   [bz]
//! ```
//!
//! that returns `W uz` in place of `uz`. Iterates are advanced in scaled
//! coordinates so that nearly singular slacks keep their small eigenvalues.

use nalgebra::DVector;

use super::cone::{ConeVec, Scaling};
use crate::error::{Error, Result};

pub trait ConeProgram {
    type Factor;

    fn n_x(&self) -> usize;
    fn n_y(&self) -> usize;
    fn n_lp(&self) -> usize;
    fn n_psd(&self) -> usize;

    fn c(&self) -> &DVector<f64>;
    fn b(&self) -> &DVector<f64>;
    fn h(&self) -> &ConeVec;

    fn g_mul(&self, x: &DVector<f64>) -> ConeVec;
    fn gt_mul(&self, z: &ConeVec) -> DVector<f64>;
    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64>;
    fn at_mul(&self, y: &DVector<f64>) -> DVector<f64>;

    fn kkt_factor(&self, w: &Scaling) -> Result<Self::Factor>;
    /// Returns `(ux, uy, W uz)`.
    fn kkt_solve(
        &self,
        f: &Self::Factor,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub feastol: f64,
    pub reltol: f64,
    pub abstol: f64,
    /// Accepted on stall when the strict tolerances were not reached.
    pub relaxed_tol: f64,
    pub refinement_steps: usize,
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            feastol: 1e-8,
            reltol: 1e-8,
            abstol: 1e-9,
            relaxed_tol: 1e-7,
            refinement_steps: 2,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    /// No `x` satisfies the primal constraints; `(y, z)` holds the certificate.
    PrimalInfeasible,
    /// The dual program is infeasible; `(x, s)` holds the certificate.
    DualInfeasible,
    Stall,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub status: IpmStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: ConeVec,
    pub z: ConeVec,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

struct Kkt<'a, P: ConeProgram> {
    prog: &'a P,
    w: &'a Scaling,
    f: P::Factor,
    refine: usize,
}

impl<P: ConeProgram> Kkt<'_, P> {
    fn solve(
        &self,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let (p, w) = (self.prog, self.w);
        let (mut ux, mut uy, mut uzs) = p.kkt_solve(&self.f, w, bx, by, bz);
        for _ in 0..self.refine {
            let uz = w.apply_inv(&uzs);
            let rx = bx - p.at_mul(&uy) - p.gt_mul(&uz);
            let ry = by - p.a_mul(&ux);
            let rz = bz.sub(&p.g_mul(&ux)).add(&w.apply_t(&uzs));
            let (dx, dy, dz) = p.kkt_solve(&self.f, w, &rx, &ry, &rz);
            ux += dx;
            uy += dy;
            uzs.axpy(1.0, &dz);
        }
        (ux, uy, uzs)
    }
}

fn shift_into_cone(v: &mut ConeVec) {
    let t = v.max_violation();
    if t >= -1e-8 * v.norm().max(1.0) {
        let e = ConeVec::identity(v.n_lp(), v.n_psd());
        v.axpy(1.0 + t, &e);
    }
}

struct Direction {
    x: DVector<f64>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
    /// `W⁻ᵀ Δs` and `W Δz`.
    s_scaled: ConeVec,
    z_scaled: ConeVec,
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: ConeVec,
    z: ConeVec,
    tau: f64,
}

#[derive(Clone, Copy)]
struct Measures {
    pcost: f64,
    dcost: f64,
    pres: f64,
    dres: f64,
    gap: f64,
    relgap: f64,
}

impl Measures {
    fn meets(&self, tol: f64, abstol: f64) -> bool {
        self.pres <= tol && self.dres <= tol && (self.gap <= abstol || self.relgap <= tol)
    }

    fn score(&self) -> f64 {
        self.pres.max(self.dres).max(self.relgap.min(self.gap))
    }
}

fn finish(
    status: IpmStatus,
    it: &Iterate,
    scale: f64,
    iterations: usize,
    m: &Measures,
) -> IpmSolution {
    IpmSolution {
        status,
        x: &it.x / scale,
        y: &it.y / scale,
        s: it.s.scaled(1.0 / scale),
        z: it.z.scaled(1.0 / scale),
        iterations,
        primal_objective: m.pcost,
        dual_objective: m.dcost,
        primal_residual: m.pres,
        dual_residual: m.dres,
        gap: m.gap,
        relative_gap: m.relgap,
    }
}

pub fn solve<P: ConeProgram>(prog: &P, settings: &IpmSettings) -> Result<IpmSolution> {
    let (n_x, n_y, n_lp, n_psd) = (prog.n_x(), prog.n_y(), prog.n_lp(), prog.n_psd());
    let (c, b, h) = (prog.c(), prog.b(), prog.h());
    let degree = (n_lp + n_psd) as f64;
    let e = ConeVec::identity(n_lp, n_psd);

    // Starting point from two least-squares style solves with W = I.
    let w0 = Scaling::identity(n_lp, n_psd);
    let kkt0 = Kkt {
        prog,
        w: &w0,
        f: prog.kkt_factor(&w0)?,
        refine: settings.refinement_steps,
    };
    let (mut x, _, zt) = kkt0.solve(&DVector::zeros(n_x), b, h);
    let mut s = zt.scaled(-1.0);
    shift_into_cone(&mut s);
    let (_, mut y, mut z) = kkt0.solve(&(-c), &DVector::zeros(n_y), &ConeVec::zeros(n_lp, n_psd));
    shift_into_cone(&mut z);
    let (mut tau, mut kappa) = (1.0, 1.0);
    let mut w = Scaling::nesterov_todd(&s, &z)?;

    let res_x0 = c.norm().max(1.0);
    let res_y0 = b.norm().max(1.0);
    let res_z0 = h.norm().max(1.0);
    let mut best: Option<(Iterate, Measures, usize)> = None;

    for iter in 0..=settings.max_iter {
        let hrx = prog.at_mul(&y) + prog.gt_mul(&z);
        let rx = &hrx + c * tau;
        let hry = prog.a_mul(&x);
        let ry = &hry - b * tau;
        let hrz = prog.g_mul(&x).add(&s);
        let mut rz = hrz.clone();
        rz.axpy(-tau, h);
        let (cx, by, hz) = (c.dot(&x), b.dot(&y), h.dot(&z));
        let rt = cx + by + hz + kappa;

        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (degree + 1.0);
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let gap = sz / (tau * tau);
        let measures = Measures {
            pcost,
            dcost,
            pres: (ry.norm() / res_y0).max(rz.norm() / res_z0) / tau,
            dres: rx.norm() / res_x0 / tau,
            gap,
            relgap: if pcost < 0.0 {
                gap / -pcost
            } else if dcost > 0.0 {
                gap / dcost
            } else {
                f64::INFINITY
            },
        };
        let pinfres = if hz + by < 0.0 {
            hrx.norm() / res_x0 / -(hz + by)
        } else {
            f64::INFINITY
        };
        let dinfres = if cx < 0.0 {
            (hry.norm() / res_y0).max(hrz.norm() / res_z0) / -cx
        } else {
            f64::INFINITY
        };
        let current = Iterate {
            x: x.clone(),
            y: y.clone(),
            s: s.clone(),
            z: z.clone(),
            tau,
        };

        if measures.meets(settings.feastol, settings.abstol) {
            return Ok(finish(IpmStatus::Optimal, &current, tau, iter, &measures));
        }
        if pinfres <= settings.feastol {
            let scale = -(hz + by);
            return Ok(finish(
                IpmStatus::PrimalInfeasible,
                &current,
                scale,
                iter,
                &measures,
            ));
        }
        if dinfres <= settings.feastol {
            return Ok(finish(
                IpmStatus::DualInfeasible,
                &current,
                -cx,
                iter,
                &measures,
            ));
        }
        if best
            .as_ref()
            .is_none_or(|(_, m, _)| measures.score() < m.score())
        {
            best = Some((current.clone(), measures, iter));
        }

        let stall = |best: &Option<(Iterate, Measures, usize)>| {
            let relaxed = settings.relaxed_tol;
            if pinfres <= relaxed {
                return finish(
                    IpmStatus::PrimalInfeasible,
                    &current,
                    -(hz + by),
                    iter,
                    &measures,
                );
            }
            if dinfres <= relaxed {
                return finish(IpmStatus::DualInfeasible, &current, -cx, iter, &measures);
            }
            let (it, m, _) = best.as_ref().expect("best iterate recorded");
            let status = if m.meets(relaxed, relaxed) {
                IpmStatus::Optimal
            } else {
                IpmStatus::Stall
            };
            finish(status, it, it.tau, iter, m)
        };
        if iter == settings.max_iter {
            return Ok(stall(&best));
        }

        let f = match prog.kkt_factor(&w) {
            Ok(f) => f,
            Err(_) => return Ok(stall(&best)),
        };
        let kkt = Kkt {
            prog,
            w: &w,
            f,
            refine: settings.refinement_steps,
        };
        // hᵀz = (W⁻ᵀh)ᵀ(W z)
        let th = w.apply_inv_t(h);
        let (x1, y1, z1) = kkt.solve(&(-c), b, h);
        let denom1 = c.dot(&x1) + b.dot(&y1) + th.dot(&z1) - kappa / tau;

        let newton = |eta: f64, ds_target: &ConeVec, dkappa_target: f64| -> Direction {
            let lam_div = w.lambda_div(ds_target);
            let mut bz = w.apply_t(&lam_div);
            bz.axpy(eta, &rz);
            let bz = bz.scaled(-1.0);
            let (x2, y2, z2) = kkt.solve(&(&rx * -eta), &(&ry * -eta), &bz);
            let dtau =
                (-eta * rt - dkappa_target / tau - c.dot(&x2) - b.dot(&y2) - th.dot(&z2)) / denom1;
            let mut z_scaled = z2;
            z_scaled.axpy(dtau, &z1);
            Direction {
                x: x2 + &x1 * dtau,
                y: y2 + &y1 * dtau,
                tau: dtau,
                kappa: (dkappa_target - kappa * dtau) / tau,
                s_scaled: lam_div.sub(&z_scaled),
                z_scaled,
            }
        };
        let max_step = |d: &Direction| {
            let mut a = w.max_step(&d.s_scaled).min(w.max_step(&d.z_scaled));
            if d.tau < 0.0 {
                a = a.min(-tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-kappa / d.kappa);
            }
            a
        };

        let lam_sq = w.lambda_sq();
        let affine = newton(1.0, &lam_sq.scaled(-1.0), -tau * kappa);
        let sigma = (1.0 - max_step(&affine).min(1.0)).powi(3);

        let mut ds_target = lam_sq.scaled(-1.0);
        ds_target.axpy(sigma * mu, &e);
        ds_target.axpy(-1.0, &affine.s_scaled.jordan(&affine.z_scaled));
        let dk_target = -tau * kappa + sigma * mu - affine.tau * affine.kappa;
        let dir = newton(1.0 - sigma, &ds_target, dk_target);
        let step = (settings.step_fraction * max_step(&dir)).min(1.0);
        if !(step > 1e-12) || !step.is_finite() {
            return Ok(stall(&best));
        }

        let next = match w.update(&dir.s_scaled, &dir.z_scaled, step) {
            Ok(next) => next,
            Err(_) => return Ok(stall(&best)),
        };
        w = next;
        (s, z) = w.iterates();
        x.axpy(step, &dir.x, 1.0);
        y.axpy(step, &dir.y, 1.0);
        tau += step * dir.tau;
        kappa += step * dir.kappa;
        if !(tau > 0.0 && kappa > 0.0) {
            return Err(Error::Numerical(
                "homogeneous variables left the positive orthant".into(),
            ));
        }
    }
    unreachable!("loop returns on the final iteration")
}
