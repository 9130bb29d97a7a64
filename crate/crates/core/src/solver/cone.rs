//! Product cone `R^n_+ × H^m_+` (nonnegative orthant times one Hermitian PSD
//! block), its Jordan algebra and Nesterov-Todd scaling.
//!
//! The inner product on the PSD block is `<A, B> = Re Tr(Aᴴ B)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Hermitian part `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn hermitian_dot(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeVec {
    pub lp: DVector<f64>,
    pub psd: CMat,
}

impl ConeVec {
    pub fn zeros(n_lp: usize, n_psd: usize) -> Self {
        Self {
            lp: DVector::zeros(n_lp),
            psd: CMat::zeros(n_psd, n_psd),
        }
    }

    /// Cone identity `e`.
    pub fn identity(n_lp: usize, n_psd: usize) -> Self {
        Self {
            lp: DVector::from_element(n_lp, 1.0),
            psd: CMat::identity(n_psd, n_psd),
        }
    }

    pub fn n_lp(&self) -> usize {
        self.lp.len()
    }

    pub fn n_psd(&self) -> usize {
        self.psd.nrows()
    }

    pub fn degree(&self) -> usize {
        self.n_lp() + self.n_psd()
    }

    pub fn dot(&self, other: &ConeVec) -> f64 {
        self.lp.dot(&other.lp) + hermitian_dot(&self.psd, &other.psd)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ConeVec) {
        self.lp.axpy(a, &other.lp, 1.0);
        self.psd += &other.psd * Complex64::new(a, 0.0);
    }

    pub fn scaled(&self, a: f64) -> ConeVec {
        ConeVec {
            lp: &self.lp * a,
            psd: &self.psd * Complex64::new(a, 0.0),
        }
    }

    pub fn sub(&self, other: &ConeVec) -> ConeVec {
        ConeVec {
            lp: &self.lp - &other.lp,
            psd: &self.psd - &other.psd,
        }
    }

    pub fn add(&self, other: &ConeVec) -> ConeVec {
        ConeVec {
            lp: &self.lp + &other.lp,
            psd: &self.psd + &other.psd,
        }
    }

    /// Smallest `t` with `self + t e` in the closed cone.
    pub fn max_violation(&self) -> f64 {
        let lp = self.lp.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(-v));
        let psd = hermitian_eigenvalues(&self.psd)
            .first()
            .map_or(f64::NEG_INFINITY, |&v| -v);
        lp.max(psd)
    }

    /// Symmetric Jordan product: elementwise on the orthant, `(AB + BA)/2` on the PSD block.
    pub fn jordan(&self, other: &ConeVec) -> ConeVec {
        let ab = &self.psd * &other.psd;
        ConeVec {
            lp: self.lp.component_mul(&other.lp),
            psd: (&ab + ab.adjoint()) * Complex64::new(0.5, 0.0),
        }
    }
}

/// Nesterov-Todd scaling `W` with `W z = W⁻ᵀ s = λ`.
///
/// Orthant: `W = diag(w)`, `w = sqrt(s / z)`. PSD block: `W(Z) = Rᴴ Z R`
/// with `λ` diagonal.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub w_lp: DVector<f64>,
    pub lambda_lp: DVector<f64>,
    pub r: CMat,
    pub r_inv: CMat,
    pub lambda_psd: DVector<f64>,
    /// `R Rᴴ`, so that `WᵀW(U) = Ω U Ω`.
    pub omega: CMat,
    /// `Ω⁻¹`.
    pub psi: CMat,
}

/// Complex `Cholesky::new` takes complex square roots of negative pivots
/// instead of failing, so definiteness is checked on the diagonal of `L`.
fn lower_cholesky(a: &CMat, what: &str) -> Result<CMat> {
    let l = nalgebra::Cholesky::new(hermitian_part(a)).map(|c| c.l());
    match l {
        Some(l)
            if l.diagonal()
                .iter()
                .all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re) =>
        {
            Ok(l)
        }
        _ => Err(Error::Numerical(format!(
            "{what} lost positive definiteness"
        ))),
    }
}

/// `R = L_s V Σ^{-1/2}` and `R⁻¹ = Σ^{1/2} Vᴴ L_s⁻¹` from the SVD
/// `L_zᴴ L_s = U Σ Vᴴ`, for any square roots `s = L_s L_sᴴ`, `z = L_z L_zᴴ`.
fn psd_scaling(lzh_ls: &CMat, ls: &CMat, ls_inv: &CMat) -> Result<(CMat, CMat, DVector<f64>)> {
    let svd = lzh_ls.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let sigma = svd.singular_values;
    if sigma.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("degenerate scaling point".into()));
    }
    let mut r = ls * v_t.adjoint();
    for (j, &sv) in sigma.iter().enumerate() {
        let mut col = r.column_mut(j);
        col *= Complex64::new(1.0 / sv.sqrt(), 0.0);
    }
    let mut r_inv = v_t * ls_inv;
    for (i, &sv) in sigma.iter().enumerate() {
        let mut row = r_inv.row_mut(i);
        row *= Complex64::new(sv.sqrt(), 0.0);
    }
    Ok((r, r_inv, sigma))
}

impl Scaling {
    pub fn identity(n_lp: usize, n_psd: usize) -> Self {
        let eye = CMat::identity(n_psd, n_psd);
        Self {
            w_lp: DVector::from_element(n_lp, 1.0),
            lambda_lp: DVector::from_element(n_lp, 1.0),
            r: eye.clone(),
            r_inv: eye.clone(),
            lambda_psd: DVector::from_element(n_psd, 1.0),
            omega: eye.clone(),
            psi: eye,
        }
    }

    pub fn nesterov_todd(s: &ConeVec, z: &ConeVec) -> Result<Self> {
        if s.lp.iter().chain(z.lp.iter()).any(|&v| !(v > 0.0)) {
            return Err(Error::Numerical(
                "orthant iterate left the cone interior".into(),
            ));
        }
        let w_lp = s.lp.zip_map(&z.lp, |a, b| (a / b).sqrt());
        let lambda_lp = s.lp.zip_map(&z.lp, |a, b| (a * b).sqrt());
        let n = s.n_psd();
        if n == 0 {
            let empty = CMat::zeros(0, 0);
            return Ok(Self {
                w_lp,
                lambda_lp,
                r: empty.clone(),
                r_inv: empty.clone(),
                lambda_psd: DVector::zeros(0),
                omega: empty.clone(),
                psi: empty,
            });
        }
        let ls = lower_cholesky(&s.psd, "primal slack")?;
        let lz = lower_cholesky(&z.psd, "dual slack")?;
        let ls_inv = ls
            .solve_lower_triangular(&CMat::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let (r, r_inv, sigma) = psd_scaling(&(lz.adjoint() * &ls), &ls, &ls_inv)?;
        Ok(Self::assemble(w_lp, lambda_lp, r, r_inv, sigma))
    }

    fn assemble(
        w_lp: DVector<f64>,
        lambda_lp: DVector<f64>,
        r: CMat,
        r_inv: CMat,
        lambda_psd: DVector<f64>,
    ) -> Self {
        let omega = hermitian_part(&(&r * r.adjoint()));
        let psi = hermitian_part(&(r_inv.adjoint() * &r_inv));
        Self {
            w_lp,
            lambda_lp,
            r,
            r_inv,
            lambda_psd,
            omega,
            psi,
        }
    }

    /// Scaling at `s + a·Wᵀds`, `z + a·W⁻¹dz` from the scaled directions
    /// `ds`, `dz`, computed without leaving scaled coordinates.
    pub fn update(&self, ds: &ConeVec, dz: &ConeVec, step: f64) -> Result<Self> {
        let lam = self.lambda();
        let mut st = lam.clone();
        st.axpy(step, ds);
        let mut zt = lam;
        zt.axpy(step, dz);
        if st.lp.iter().chain(zt.lp.iter()).any(|&v| !(v > 0.0)) {
            return Err(Error::Numerical(
                "orthant iterate left the cone interior".into(),
            ));
        }
        let w_lp = self
            .w_lp
            .zip_zip_map(&st.lp, &zt.lp, |w, a, b| w * (a / b).sqrt());
        let lambda_lp = st.lp.zip_map(&zt.lp, |a, b| (a * b).sqrt());
        let n = self.lambda_psd.len();
        if n == 0 {
            return Ok(Self::assemble(
                w_lp,
                lambda_lp,
                self.r.clone(),
                self.r_inv.clone(),
                DVector::zeros(0),
            ));
        }
        let ls = lower_cholesky(&st.psd, "primal slack")?;
        let lz = lower_cholesky(&zt.psd, "dual slack")?;
        let ls_inv = ls
            .solve_lower_triangular(&CMat::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let (r, r_inv, sigma) = psd_scaling(
            &(lz.adjoint() * &ls),
            &(&self.r * &ls),
            &(&ls_inv * &self.r_inv),
        )?;
        Ok(Self::assemble(w_lp, lambda_lp, r, r_inv, sigma))
    }

    /// `(Wᵀλ, W⁻¹λ)`: the iterates represented by this scaling.
    pub fn iterates(&self) -> (ConeVec, ConeVec) {
        let lam = self.lambda();
        (self.apply_t(&lam), self.apply_inv(&lam))
    }

    pub fn lambda(&self) -> ConeVec {
        let n = self.lambda_psd.len();
        let mut psd = CMat::zeros(n, n);
        for i in 0..n {
            psd[(i, i)] = Complex64::new(self.lambda_psd[i], 0.0);
        }
        ConeVec {
            lp: self.lambda_lp.clone(),
            psd,
        }
    }

    /// `W z`
    pub fn apply(&self, z: &ConeVec) -> ConeVec {
        ConeVec {
            lp: self.w_lp.component_mul(&z.lp),
            psd: hermitian_part(&(self.r.adjoint() * &z.psd * &self.r)),
        }
    }

    /// `W⁻¹ u`
    pub fn apply_inv(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.component_div(&self.w_lp),
            psd: hermitian_part(&(self.r_inv.adjoint() * &u.psd * &self.r_inv)),
        }
    }

    /// `W⁻ᵀ s`
    pub fn apply_inv_t(&self, s: &ConeVec) -> ConeVec {
        ConeVec {
            lp: s.lp.component_div(&self.w_lp),
            psd: hermitian_part(&(&self.r_inv * &s.psd * self.r_inv.adjoint())),
        }
    }

    /// `Wᵀ u`
    pub fn apply_t(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: self.w_lp.component_mul(&u.lp),
            psd: hermitian_part(&(&self.r * &u.psd * self.r.adjoint())),
        }
    }

    /// `WᵀW u`
    pub fn apply_tw(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: self.w_lp.component_mul(&self.w_lp).component_mul(&u.lp),
            psd: hermitian_part(&(&self.omega * &u.psd * &self.omega)),
        }
    }

    /// `(WᵀW)⁻¹ u`
    pub fn apply_tw_inv(&self, u: &ConeVec) -> ConeVec {
        ConeVec {
            lp: u.lp.component_div(&self.w_lp.component_mul(&self.w_lp)),
            psd: hermitian_part(&(&self.psi * &u.psd * &self.psi)),
        }
    }

    /// `λ ∘ λ`
    pub fn lambda_sq(&self) -> ConeVec {
        let mut l = self.lambda();
        l.lp.apply(|v| *v *= *v);
        for i in 0..l.psd.nrows() {
            l.psd[(i, i)] = Complex64::new(self.lambda_psd[i].powi(2), 0.0);
        }
        l
    }

    /// Solves `λ ∘ y = d` for `y`.
    pub fn lambda_div(&self, d: &ConeVec) -> ConeVec {
        let lam = &self.lambda_psd;
        let psd = CMat::from_fn(d.n_psd(), d.n_psd(), |i, j| {
            d.psd[(i, j)] * (2.0 / (lam[i] + lam[j]))
        });
        ConeVec {
            lp: d.lp.component_div(&self.lambda_lp),
            psd,
        }
    }

    /// Largest step `a` keeping `λ + a·d` in the cone, for scaled directions.
    pub fn max_step(&self, d: &ConeVec) -> f64 {
        let mut step = f64::INFINITY;
        for (l, v) in self.lambda_lp.iter().zip(d.lp.iter()) {
            if *v < 0.0 {
                step = step.min(-l / v);
            }
        }
        let n = self.lambda_psd.len();
        if n > 0 {
            let inv_sqrt: Vec<f64> = self.lambda_psd.iter().map(|l| 1.0 / l.sqrt()).collect();
            let m = CMat::from_fn(n, n, |i, j| d.psd[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]));
            if let Some(&min) = hermitian_eigenvalues(&m).first() {
                if min < 0.0 {
                    step = step.min(-1.0 / min);
                }
            }
        }
        step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> CMat {
        // deterministic pseudo-random Hermitian PD matrix
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let a = CMat::from_fn(n, n, |_, _| Complex64::new(next(), next()));
        hermitian_part(&(&a * a.adjoint())) + CMat::identity(n, n) * Complex64::new(0.1, 0.0)
    }

    fn point(seed: u64) -> ConeVec {
        ConeVec {
            lp: DVector::from_vec(vec![0.5, 2.0, 1e-3]),
            psd: herm(4, seed),
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = herm(4, 5) - CMat::identity(4, 4) * Complex64::new(50.0, 0.0);
        assert!(lower_cholesky(&a, "test").is_err());
        assert!(lower_cholesky(&herm(4, 5), "test").is_ok());
    }

    #[test]
    fn nt_scaling_identities() {
        let s = point(1);
        let z = ConeVec {
            lp: DVector::from_vec(vec![3.0, 0.1, 7.0]),
            psd: herm(4, 2),
        };
        let w = Scaling::nesterov_todd(&s, &z).unwrap();
        let lam = w.lambda();
        assert!(w.apply(&z).sub(&lam).norm() < 1e-10);
        assert!(w.apply_inv_t(&s).sub(&lam).norm() < 1e-10);
        let u = point(3);
        let round = w.apply_tw_inv(&w.apply_tw(&u));
        assert!(round.sub(&u).norm() < 1e-9 * u.norm());
        // WᵀW = Wᵀ ∘ W
        assert!(w.apply_t(&w.apply(&u)).sub(&w.apply_tw(&u)).norm() < 1e-9 * u.norm());
        // adjointness of W
        let v = point(4);
        assert!((w.apply(&u).dot(&v) - u.dot(&w.apply_t(&v))).abs() < 1e-9);
    }

    #[test]
    fn lambda_division_inverts_jordan() {
        let s = point(5);
        let z = point(6);
        let w = Scaling::nesterov_todd(&s, &z).unwrap();
        let d = point(7);
        let y = w.lambda_div(&d);
        assert!(w.lambda().jordan(&y).sub(&d).norm() < 1e-10);
    }

    #[test]
    fn step_to_boundary() {
        let w = Scaling::identity(2, 2);
        let d = ConeVec {
            lp: DVector::from_vec(vec![-0.5, 1.0]),
            psd: CMat::from_diagonal(&DVector::from_vec(vec![
                Complex64::new(-4.0, 0.0),
                Complex64::new(1.0, 0.0),
            ])),
        };
        assert!((w.max_step(&d) - 0.25).abs() < 1e-12);
        let v = ConeVec {
            lp: DVector::from_vec(vec![1.0, -2.0]),
            psd: CMat::identity(2, 2),
        };
        assert_eq!(v.max_violation(), 2.0);
    }
}
