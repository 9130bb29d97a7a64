//! Cone program with explicitly stored constraint matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::cone::{hermitian_dot, CMat, ConeVec, Scaling};
use super::ipm::ConeProgram;
use crate::error::{Error, Result};

/// `G x = (G_lp x, Σ x_j G_j)` with each `G_j` Hermitian.
#[derive(Debug, Clone)]
pub struct DenseProgram {
    pub c: DVector<f64>,
    pub g_lp: DMatrix<f64>,
    pub g_psd: Vec<CMat>,
    pub h: ConeVec,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseProgram {
    pub fn new(
        c: DVector<f64>,
        g_lp: DMatrix<f64>,
        g_psd: Vec<CMat>,
        h: ConeVec,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let n = c.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(format!("dense program: {what}")))
            }
        };
        check(g_lp.ncols() == n && g_lp.nrows() == h.n_lp(), "G_lp shape")?;
        check(g_psd.len() == n || h.n_psd() == 0, "G_psd count")?;
        check(
            g_psd
                .iter()
                .all(|g| g.nrows() == h.n_psd() && g.ncols() == h.n_psd()),
            "G_psd shape",
        )?;
        check(a.ncols() == n && a.nrows() == b.len(), "A shape")?;
        let g_psd = if h.n_psd() == 0 {
            vec![CMat::zeros(0, 0); n]
        } else {
            g_psd
        };
        Ok(Self {
            c,
            g_lp,
            g_psd,
            h,
            a,
            b,
        })
    }
}

impl ConeProgram for DenseProgram {
    type Factor = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

    fn n_x(&self) -> usize {
        self.c.len()
    }
    fn n_y(&self) -> usize {
        self.b.len()
    }
    fn n_lp(&self) -> usize {
        self.h.n_lp()
    }
    fn n_psd(&self) -> usize {
        self.h.n_psd()
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
        let n = self.n_psd();
        let mut psd = CMat::zeros(n, n);
        for (g, &xj) in self.g_psd.iter().zip(x.iter()) {
            psd += g * Complex64::new(xj, 0.0);
        }
        ConeVec {
            lp: &self.g_lp * x,
            psd,
        }
    }

    fn gt_mul(&self, z: &ConeVec) -> DVector<f64> {
        let mut out = self.g_lp.tr_mul(&z.lp);
        for (o, g) in out.iter_mut().zip(&self.g_psd) {
            *o += hermitian_dot(g, &z.psd);
        }
        out
    }

    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }

    fn at_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(y)
    }

    fn kkt_factor(&self, w: &Scaling) -> Result<Self::Factor> {
        let (n, p) = (self.n_x(), self.n_y());
        let mut k = DMatrix::zeros(n + p, n + p);
        for j in 0..n {
            let col = ConeVec {
                lp: self.g_lp.column(j).into_owned(),
                psd: self.g_psd[j].clone(),
            };
            let hcol = self.gt_mul(&w.apply_tw_inv(&col));
            k.view_mut((0, j), (n, 1)).copy_from(&hcol);
        }
        k.view_mut((n, 0), (p, n)).copy_from(&self.a);
        k.view_mut((0, n), (n, p)).copy_from(&self.a.transpose());
        let lu = k.lu();
        if !lu.is_invertible() {
            return Err(Error::Numerical("singular KKT matrix".into()));
        }
        Ok(lu)
    }

    fn kkt_solve(
        &self,
        f: &Self::Factor,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let n = self.n_x();
        let mut rhs = DVector::zeros(n + by.len());
        rhs.rows_mut(0, n)
            .copy_from(&(bx + self.gt_mul(&w.apply_tw_inv(bz))));
        rhs.rows_mut(n, by.len()).copy_from(by);
        let sol = f.solve(&rhs).unwrap_or(rhs);
        let ux = sol.rows(0, n).into_owned();
        let uy = sol.rows(n, by.len()).into_owned();
        let uz = w.apply_inv_t(&self.g_mul(&ux).sub(bz));
        (ux, uy, uz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ipm::{solve, IpmSettings, IpmStatus};

    fn real(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn linear_program() {
        // min -x1 - x2 s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0  -> (1.6, 1.2)
        let c = DVector::from_vec(vec![-1.0, -1.0]);
        let g = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let h = ConeVec {
            lp: DVector::from_vec(vec![4.0, 6.0, 0.0, 0.0]),
            psd: CMat::zeros(0, 0),
        };
        let p =
            DenseProgram::new(c, g, vec![], h, DMatrix::zeros(0, 2), DVector::zeros(0)).unwrap();
        let sol = solve(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 1.6).abs() < 1e-6 && (sol.x[1] - 1.2).abs() < 1e-6);
        assert!((sol.primal_objective + 2.8).abs() < 1e-7);
    }

    #[test]
    fn hermitian_sdp_smallest_eigenvalue() {
        // max t s.t. C - t I ⪰ 0  ->  t = λ_min(C)
        let c_mat = CMat::from_row_slice(
            2,
            2,
            &[
                real(2.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                real(2.0),
            ],
        );
        let p = DenseProgram::new(
            DVector::from_vec(vec![-1.0]),
            DMatrix::zeros(0, 1),
            vec![CMat::identity(2, 2)],
            ConeVec {
                lp: DVector::zeros(0),
                psd: c_mat,
            },
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7, "{}", sol.x[0]);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x <= -1 and x >= 0
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = ConeVec {
            lp: DVector::from_vec(vec![-1.0, 0.0]),
            psd: CMat::zeros(0, 0),
        };
        let p = DenseProgram::new(
            DVector::from_vec(vec![1.0]),
            g,
            vec![],
            h,
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, IpmStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        // min -x s.t. x >= 0
        let g = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let h = ConeVec {
            lp: DVector::zeros(1),
            psd: CMat::zeros(0, 0),
        };
        let p = DenseProgram::new(
            DVector::from_vec(vec![-1.0]),
            g,
            vec![],
            h,
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, IpmStatus::DualInfeasible);
    }
}
