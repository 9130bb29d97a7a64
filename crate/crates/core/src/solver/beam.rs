//! Lifted linear-array design problem in conic form with a structured KKT
//! solver.
//!
//! The design problem over `X ∈ H^M_+` and the sidelobe level `t`
//!
//! ```text
//! minimize    t + Tr(ρV X)
//! subject to  diag X = 1
//!             G v ≤ h,   v = (Re r_1..Re r_{M-1}, Im r_1..Im r_{M-1}, t)
//! ```
//!
//! where `r_d = Σ_n X[n+d, n]`, is handed to the interior-point method as the
//! dual of
//!
//! ```text
//! minimize    -1ᵀμ + hᵀζ
//! subject to  ρV - T*λ - Diag μ ⪰ 0,   ζ ≥ 0
//!             λ + Gᵀζ = -e_t
//! ```
//!
//! so that `X` is the PSD block of the dual slack and `t = -y_last`.
//! Because every beam constraint depends on `X` only through `v`, the KKT
//! system reduces to dense solves of size `3M-2` and `2M-1`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::cone::{hermitian_part, CMat, ConeVec, Scaling};
use super::ipm::ConeProgram;
use crate::error::{Error, Result};

/// Row of `G` for `aᴴ X a` at phase step `u`, restricted to the `v` entries
/// without the constant `M` contributed by the unit diagonal.
pub fn quadratic_form_row(m: usize, u: f64) -> DVector<f64> {
    let mut row = DVector::zeros(2 * m - 1);
    for d in 1..m {
        let arg = d as f64 * u;
        row[d - 1] = 2.0 * arg.cos();
        row[m - 1 + d - 1] = -2.0 * arg.sin();
    }
    row
}

/// `(Re r_d, Im r_d)` for `d = 1..M-1`.
pub fn toeplitz_sums(z: &CMat) -> DVector<f64> {
    let m = z.nrows();
    let mut out = DVector::zeros(2 * m.saturating_sub(1));
    for d in 1..m {
        let r: Complex64 = (0..m - d).map(|n| z[(n + d, n)]).sum();
        out[d - 1] = r.re;
        out[m - 1 + d - 1] = r.im;
    }
    out
}

/// Adjoint of [`toeplitz_sums`] under `Re Tr(AᴴB)`.
pub fn toeplitz_adjoint(m: usize, lambda: &[f64]) -> CMat {
    let mut y = CMat::zeros(m, m);
    for d in 1..m {
        let v = Complex64::new(0.5 * lambda[d - 1], 0.5 * lambda[m - 1 + d - 1]);
        for n in 0..m - d {
            y[(n + d, n)] = v;
            y[(n, n + d)] = v.conj();
        }
    }
    y
}

#[derive(Debug, Clone)]
pub struct BeamProgram {
    m: usize,
    g_ours: DMatrix<f64>,
    c: DVector<f64>,
    b: DVector<f64>,
    h: ConeVec,
}

pub struct BeamFactor {
    psi: CMat,
    r_inv: CMat,
    w: DVector<f64>,
    k: TriangularRoot,
    n: TriangularRoot,
    w2: DVector<f64>,
}

/// Real isometric vectorization of a Hermitian matrix: diagonal entries, then
/// `√2 Re` and `√2 Im` of the strict lower triangle.
fn hermitian_vec(h: &CMat) -> DVector<f64> {
    let m = h.nrows();
    let mut v = DVector::zeros(m * m);
    let mut k = 0;
    for i in 0..m {
        v[k] = h[(i, i)].re;
        k += 1;
    }
    for j in 0..m {
        for i in j + 1..m {
            v[k] = SQRT_2 * h[(i, j)].re;
            v[k + 1] = SQRT_2 * h[(i, j)].im;
            k += 2;
        }
    }
    v
}

/// `RᵀR` factorization of a Gram matrix `CᵀC` obtained from a QR of `C`,
/// which avoids squaring the condition number of `C`.
struct TriangularRoot {
    r: DMatrix<f64>,
}

impl TriangularRoot {
    fn new(c: DMatrix<f64>, what: &str) -> Result<Self> {
        let n = c.ncols();
        if c.nrows() < n {
            return Err(Error::Numerical(format!("{what} is rank deficient")));
        }
        let r = c.qr().r();
        let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().any(|v| !(v.abs() > 1e-15 * scale)) {
            return Err(Error::Numerical(format!("{what} is singular")));
        }
        Ok(Self { r })
    }

    fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .r
            .tr_solve_upper_triangular(b)
            .unwrap_or_else(|| b.clone());
        self.r.solve_upper_triangular(&y).unwrap_or(y)
    }
}

impl BeamProgram {
    /// `g` has `2M-1` columns; `rho_v` is the Hermitian penalty matrix `ρV`.
    pub fn new(m: usize, g: DMatrix<f64>, h: DVector<f64>, rho_v: CMat) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("array needs at least one element"));
        }
        if g.ncols() != 2 * m - 1 {
            return Err(Error::Dimension {
                expected: 2 * m - 1,
                got: g.ncols(),
            });
        }
        if g.nrows() != h.len() {
            return Err(Error::Dimension {
                expected: g.nrows(),
                got: h.len(),
            });
        }
        if rho_v.nrows() != m || rho_v.ncols() != m {
            return Err(Error::Dimension {
                expected: m,
                got: rho_v.nrows(),
            });
        }
        let n_l = g.nrows();
        let mut c = DVector::zeros(3 * m - 2 + n_l);
        c.rows_mut(2 * m - 2, m).fill(-1.0);
        c.rows_mut(3 * m - 2, n_l).copy_from(&h);
        let mut b = DVector::zeros(2 * m - 1);
        b[2 * m - 2] = -1.0;
        let h = ConeVec {
            lp: DVector::zeros(n_l),
            psd: hermitian_part(&rho_v),
        };
        Ok(Self {
            m,
            g_ours: g,
            c,
            b,
            h,
        })
    }

    pub fn elements(&self) -> usize {
        self.m
    }

    fn n_lambda(&self) -> usize {
        2 * self.m - 2
    }

    /// `S(Y) = (T(Y), Re diag Y)`
    fn s_op(&self, y: &CMat) -> DVector<f64> {
        let nl = self.n_lambda();
        let mut out = DVector::zeros(nl + self.m);
        out.rows_mut(0, nl).copy_from(&toeplitz_sums(y));
        for i in 0..self.m {
            out[nl + i] = y[(i, i)].re;
        }
        out
    }

    /// `S*(η) = T*λ + Diag μ`
    fn s_adj(&self, eta: &[f64]) -> CMat {
        let nl = self.n_lambda();
        let mut y = toeplitz_adjoint(self.m, &eta[..nl]);
        for i in 0..self.m {
            y[(i, i)] = Complex64::new(eta[nl + i], 0.0);
        }
        y
    }

    /// Columns `vec(R⁻¹ S*(e_k) R⁻ᴴ)`, so that `K = S Ψ(·)Ψ S* = LᵀL`.
    fn reduced_root(&self, r_inv: &CMat) -> DMatrix<f64> {
        let m = self.m;
        let nl = self.n_lambda();
        let mut l = DMatrix::zeros(m * m, nl + m);
        let half = Complex64::new(0.5, 0.0);
        let half_j = Complex64::new(0.0, 0.5);
        let r_inv_h = r_inv.adjoint();
        for d in 1..m {
            let q = r_inv.columns(d, m - d) * r_inv_h.rows(0, m - d);
            let qh = q.adjoint();
            l.set_column(d - 1, &hermitian_vec(&((&q + &qh) * half)));
            l.set_column(m - 1 + d - 1, &hermitian_vec(&((&q - &qh) * half_j)));
        }
        for i in 0..m {
            let col = r_inv.column(i);
            l.set_column(nl + i, &hermitian_vec(&(col * col.adjoint())));
        }
        l
    }

    fn split_x<'a>(&self, x: &'a DVector<f64>) -> (&'a [f64], &'a [f64]) {
        let s = x.as_slice();
        s.split_at(3 * self.m - 2)
    }

    /// `X` and `t` of the design problem from an optimal dual pair.
    pub fn design_variables(&self, y: &DVector<f64>, z: &ConeVec) -> (CMat, f64) {
        (hermitian_part(&z.psd), -y[2 * self.m - 2])
    }
}

impl ConeProgram for BeamProgram {
    type Factor = BeamFactor;

    fn n_x(&self) -> usize {
        self.c.len()
    }
    fn n_y(&self) -> usize {
        self.b.len()
    }
    fn n_lp(&self) -> usize {
        self.g_ours.nrows()
    }
    fn n_psd(&self) -> usize {
        self.m
    }
    fn c(&self) -> &DVector<f64> {
        &self.c
    }
    fn b(&self) -> &DVector<f64> {
        &self.b
    }
    fn h(&self) -> &ConeVec {
        &self.h
    }

    fn g_mul(&self, x: &DVector<f64>) -> ConeVec {
        let (eta, zeta) = self.split_x(x);
        ConeVec {
            lp: -DVector::from_column_slice(zeta),
            psd: self.s_adj(eta),
        }
    }

    fn gt_mul(&self, z: &ConeVec) -> DVector<f64> {
        let nm = 3 * self.m - 2;
        let mut out = DVector::zeros(self.n_x());
        out.rows_mut(0, nm).copy_from(&self.s_op(&z.psd));
        out.rows_mut(nm, z.lp.len()).copy_from(&(-&z.lp));
        out
    }

    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let (eta, zeta) = self.split_x(x);
        let mut out = self.g_ours.tr_mul(&DVector::from_column_slice(zeta));
        for (o, l) in out.iter_mut().zip(&eta[..self.n_lambda()]) {
            *o += l;
        }
        out
    }

    fn at_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let nl = self.n_lambda();
        let mut out = DVector::zeros(self.n_x());
        out.rows_mut(0, nl).copy_from(&y.rows(0, nl));
        out.rows_mut(3 * self.m - 2, self.g_ours.nrows())
            .copy_from(&(&self.g_ours * y));
        out
    }

    fn kkt_factor(&self, w: &Scaling) -> Result<BeamFactor> {
        let nl = self.n_lambda();
        let nm = nl + self.m;
        let nv = 2 * self.m - 1;
        let k = TriangularRoot::new(self.reduced_root(&w.r_inv), "reduced KKT block")?;

        // N = (K⁻¹)_λλ + Gᵀ W² G = CᵀC with C = [ (R_K⁻¹)_λᵀ 0 ; W G ]
        let rk_inv =
            k.r.solve_upper_triangular(&DMatrix::identity(nm, nm))
                .ok_or_else(|| Error::Numerical("singular reduced KKT factor".into()))?;
        let n_l = self.g_ours.nrows();
        let mut c = DMatrix::zeros(nm + n_l, nv);
        c.view_mut((0, 0), (nm, nl))
            .copy_from(&rk_inv.rows(0, nl).transpose());
        let mut gw = c.view_mut((nm, 0), (n_l, nv));
        gw.copy_from(&self.g_ours);
        for (mut row, &s) in gw.row_iter_mut().zip(w.w_lp.iter()) {
            row *= s;
        }
        let n = TriangularRoot::new(c, "normal matrix")?;
        Ok(BeamFactor {
            psi: w.psi.clone(),
            r_inv: w.r_inv.clone(),
            w: w.w_lp.clone(),
            k,
            n,
            w2: w.w_lp.map(|v| v * v),
        })
    }

    fn kkt_solve(
        &self,
        f: &BeamFactor,
        _w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let nl = self.n_lambda();
        let nm = nl + self.m;
        let (b_eta, b_zeta) = self.split_x(bx);
        let b_zeta = DVector::from_column_slice(b_zeta);

        let mut q = DVector::from_column_slice(b_eta);
        q += self.s_op(&(&f.psi * &bz.psd * &f.psi));
        let kq = f.k.solve_vec(&q);

        let mut rhs = self.g_ours.tr_mul(&(f.w2.component_mul(&b_zeta) - &bz.lp)) - by;
        for i in 0..nl {
            rhs[i] += kq[i];
        }
        let uy = f.n.solve_vec(&rhs);
        let mut q_eta = q;
        for i in 0..nl {
            q_eta[i] -= uy[i];
        }
        let eta = f.k.solve_vec(&q_eta);

        let u_psd = hermitian_part(
            &(&f.r_inv * (self.s_adj(eta.as_slice()) - &bz.psd) * f.r_inv.adjoint()),
        );
        let u_lp = &self.g_ours * &uy - &b_zeta;
        let u_zeta = -&bz.lp - f.w2.component_mul(&u_lp);
        let u_lp = u_lp.component_mul(&f.w);

        let mut ux = DVector::zeros(self.n_x());
        ux.rows_mut(0, nm).copy_from(&eta);
        ux.rows_mut(nm, u_zeta.len()).copy_from(&u_zeta);
        (
            ux,
            uy,
            ConeVec {
                lp: u_lp,
                psd: u_psd,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dense::DenseProgram;
    use crate::solver::ipm::{solve, IpmSettings, IpmStatus};

    fn toy(m: usize, alpha: f64) -> BeamProgram {
        // two main-lobe points, three sidelobe points, t >= 0
        let main = [0.0, 0.3];
        let side = [1.5, 2.0, 2.6];
        let n_l = main.len() + side.len() + 1;
        let mut g = DMatrix::zeros(n_l, 2 * m - 1);
        let mut h = DVector::zeros(n_l);
        let mf = m as f64;
        for (k, &u) in side.iter().enumerate() {
            let mut row = quadratic_form_row(m, u);
            row[2 * m - 2] = -1.0;
            g.set_row(k, &row.transpose());
            h[k] = -mf;
        }
        for (i, &u) in main.iter().enumerate() {
            g.set_row(side.len() + i, &(-quadratic_form_row(m, u)).transpose());
            h[side.len() + i] = mf - alpha;
        }
        g[(n_l - 1, 2 * m - 2)] = -1.0;
        let rho_v = CMat::identity(m, m) * Complex64::new(0.05, 0.0);
        BeamProgram::new(m, g, h, rho_v).unwrap()
    }

    fn to_dense(p: &BeamProgram) -> DenseProgram {
        let n = p.n_x();
        let mut g_lp = DMatrix::zeros(p.n_lp(), n);
        let mut g_psd = Vec::with_capacity(n);
        let mut a = DMatrix::zeros(p.n_y(), n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let g = p.g_mul(&e);
            g_lp.set_column(j, &g.lp);
            g_psd.push(g.psd);
            a.set_column(j, &p.a_mul(&e));
        }
        DenseProgram::new(p.c.clone(), g_lp, g_psd, p.h.clone(), a, p.b.clone()).unwrap()
    }

    #[test]
    fn adjoint_pairs() {
        let p = toy(4, 3.0);
        let x = DVector::from_fn(p.n_x(), |i, _| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4);
        let y = DVector::from_fn(p.n_y(), |i, _| ((i * 5 + 1) % 7) as f64 / 7.0 - 0.5);
        let z = ConeVec {
            lp: DVector::from_fn(p.n_lp(), |i, _| i as f64 * 0.3 - 0.7),
            psd: hermitian_part(&CMat::from_fn(4, 4, |i, j| {
                Complex64::new((i + 2 * j) as f64, i as f64 - j as f64)
            })),
        };
        assert!((p.g_mul(&x).dot(&z) - x.dot(&p.gt_mul(&z))).abs() < 1e-10);
        assert!((p.a_mul(&x).dot(&y) - x.dot(&p.at_mul(&y))).abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_matches_toeplitz_row() {
        let m = 5;
        let x: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(1.0, 0.4 * (k * k) as f64))
            .collect();
        let xv = nalgebra::DVector::from_vec(x);
        let xx = &xv * xv.adjoint();
        let u: f64 = 0.77;
        let a = nalgebra::DVector::from_fn(m, |k, _| Complex64::from_polar(1.0, -u * k as f64));
        let direct = (a.adjoint() * &xx * &a)[(0, 0)].re;
        let mut v = toeplitz_sums(&xx).as_slice().to_vec();
        v.push(0.0);
        let row = quadratic_form_row(m, u);
        let reduced = m as f64 + row.dot(&DVector::from_vec(v));
        assert!((direct - reduced).abs() < 1e-10);
    }

    #[test]
    fn structured_kkt_matches_dense() {
        let p = toy(4, 3.0);
        let d = to_dense(&p);
        let s = ConeVec {
            lp: DVector::from_fn(p.n_lp(), |i, _| 0.5 + i as f64 * 0.2),
            psd: hermitian_part(
                &(CMat::identity(4, 4) * Complex64::new(2.0, 0.0)
                    + CMat::from_fn(4, 4, |i, j| {
                        Complex64::new(0.1 * (i + j) as f64, 0.05 * (i as f64 - j as f64))
                    })),
            ),
        };
        let z = ConeVec {
            lp: DVector::from_fn(p.n_lp(), |i, _| 1.5 - i as f64 * 0.1),
            psd: CMat::identity(4, 4),
        };
        let w = Scaling::nesterov_todd(&s, &z).unwrap();
        let bx = DVector::from_fn(p.n_x(), |i, _| (i as f64 * 0.37).sin());
        let by = DVector::from_fn(p.n_y(), |i, _| (i as f64 * 0.91).cos());
        let bz = ConeVec {
            lp: DVector::from_fn(p.n_lp(), |i, _| i as f64 * 0.1),
            psd: hermitian_part(&CMat::from_fn(4, 4, |i, j| {
                Complex64::new((i * j) as f64 * 0.1, (i + j) as f64 * 0.02)
            })),
        };
        let (fs, fd) = (p.kkt_factor(&w).unwrap(), d.kkt_factor(&w).unwrap());
        let (x1, y1, z1) = p.kkt_solve(&fs, &w, &bx, &by, &bz);
        let (x2, y2, z2) = d.kkt_solve(&fd, &w, &bx, &by, &bz);
        assert!((x1 - x2).norm() < 1e-8);
        assert!((y1 - y2).norm() < 1e-8);
        assert!(z1.sub(&z2).norm() < 1e-8);
    }

    #[test]
    fn structured_and_dense_solutions_agree() {
        let p = toy(4, 3.0);
        let s1 = solve(&p, &IpmSettings::default()).unwrap();
        let s2 = solve(&to_dense(&p), &IpmSettings::default()).unwrap();
        assert_eq!(s1.status, IpmStatus::Optimal);
        assert_eq!(s2.status, IpmStatus::Optimal);
        assert!((s1.primal_objective - s2.primal_objective).abs() < 1e-6);
        let (x, t) = p.design_variables(&s1.y, &s1.z);
        for i in 0..4 {
            assert!((x[(i, i)].re - 1.0).abs() < 1e-6);
        }
        assert!(t >= -1e-8);
    }

    #[test]
    fn single_element_is_infeasible_above_unit_gain() {
        let p = toy(1, 1.5);
        let sol = solve(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, IpmStatus::DualInfeasible);
        let p = toy(1, 0.5);
        assert_eq!(
            solve(&p, &IpmSettings::default()).unwrap().status,
            IpmStatus::Optimal
        );
    }
}
