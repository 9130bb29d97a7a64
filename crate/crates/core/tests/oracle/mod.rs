//! Log-barrier reference solver for small lifted design problems.
//!
//! Works on the full Hermitian `X` with unit diagonal, parametrized by the
//! real and imaginary parts of its strictly upper entries, plus `t`:
//!
//! ```text
//! minimize    t + ρ Tr(V X)
//! subject to  aₖᴴ X aₖ ≤ t σ̃ₖ      (sidelobe)
//!             aᵢᴴ X aᵢ ≥ α σ̃ᵢ      (main lobe)
//!             t ≥ 0,  X ⪰ 0
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub struct Instance {
    pub m: usize,
    pub rho: f64,
    pub v: DMatrix<Complex64>,
    pub alpha: f64,
    pub sidelobe: Vec<(DVector<Complex64>, f64)>,
    pub mainlobe: Vec<(DVector<Complex64>, f64)>,
}

struct Linear {
    c: f64,
    g: DVector<f64>,
}

impl Linear {
    fn eval(&self, z: &DVector<f64>) -> f64 {
        self.c + self.g.dot(z)
    }
}

struct Barrier {
    m: usize,
    pairs: Vec<(usize, usize)>,
    n: usize,
    cost: DVector<f64>,
    cost0: f64,
    cons: Vec<Linear>,
}

impl Barrier {
    fn new(inst: &Instance) -> Self {
        let m = inst.m;
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|k| (k + 1..m).map(move |l| (k, l)))
            .collect();
        let np = pairs.len();
        let n = 2 * np + 1;
        // aᴴXa = Σ|a|² + Σ_{k<l} 2 Re(conj(aₖ) aₗ Xₖₗ)
        let quad = |a: &DVector<Complex64>| -> Linear {
            let mut g = DVector::zeros(n);
            for (j, &(k, l)) in pairs.iter().enumerate() {
                let c = a[k].conj() * a[l];
                g[j] = 2.0 * c.re;
                g[np + j] = -2.0 * c.im;
            }
            Linear {
                c: a.iter().map(|v| v.norm_sqr()).sum(),
                g,
            }
        };
        let mut cons = Vec::new();
        for (a, s) in &inst.sidelobe {
            let q = quad(a);
            let mut g = -q.g;
            g[n - 1] = *s;
            cons.push(Linear { c: -q.c, g });
        }
        for (a, s) in &inst.mainlobe {
            let q = quad(a);
            cons.push(Linear {
                c: q.c - inst.alpha * s,
                g: q.g,
            });
        }
        let mut g_t = DVector::zeros(n);
        g_t[n - 1] = 1.0;
        cons.push(Linear { c: 0.0, g: g_t });

        let mut cost = DVector::zeros(n);
        for (j, &(k, l)) in pairs.iter().enumerate() {
            let c = inst.v[(l, k)];
            cost[j] = 2.0 * inst.rho * c.re;
            cost[np + j] = -2.0 * inst.rho * c.im;
        }
        cost[n - 1] = 1.0;
        let cost0 = inst.rho * inst.v.trace().re;
        Self {
            m,
            pairs,
            n,
            cost,
            cost0,
            cons,
        }
    }

    fn basis(&self, j: usize) -> DMatrix<Complex64> {
        let np = self.pairs.len();
        let mut b = DMatrix::zeros(self.m, self.m);
        let (k, l) = self.pairs[j % np];
        if j < np {
            b[(k, l)] = Complex64::new(1.0, 0.0);
            b[(l, k)] = Complex64::new(1.0, 0.0);
        } else {
            b[(k, l)] = Complex64::new(0.0, 1.0);
            b[(l, k)] = Complex64::new(0.0, -1.0);
        }
        b
    }

    fn matrix(&self, z: &DVector<f64>) -> DMatrix<Complex64> {
        let np = self.pairs.len();
        let mut x = DMatrix::identity(self.m, self.m);
        for (j, &(k, l)) in self.pairs.iter().enumerate() {
            let v = Complex64::new(z[j], z[np + j]);
            x[(k, l)] = v;
            x[(l, k)] = v.conj();
        }
        x
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.cost0 + self.cost.dot(z)
    }

    /// `τ f(z) - Σ log cᵢ(z) - log det X(z)`, `None` outside the domain.
    fn value(&self, tau: f64, z: &DVector<f64>) -> Option<f64> {
        let mut acc = tau * self.objective(z);
        for c in &self.cons {
            let v = c.eval(z);
            if v.is_nan() || v <= 0.0 {
                return None;
            }
            acc -= v.ln();
        }
        let eig = self.matrix(z).symmetric_eigenvalues();
        if !eig.iter().all(|&l| l > 0.0) {
            return None;
        }
        Some(acc - eig.iter().map(|l| l.ln()).sum::<f64>())
    }

    fn newton(&self, tau: f64, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut grad = &self.cost * tau;
        let mut hess = DMatrix::zeros(n, n);
        for c in &self.cons {
            let v = c.eval(z);
            grad -= &c.g / v;
            hess += &c.g * c.g.transpose() / (v * v);
        }
        let y = self
            .matrix(z)
            .try_inverse()
            .expect("iterate stays positive definite");
        let yb: Vec<DMatrix<Complex64>> = (0..n - 1).map(|j| &y * self.basis(j)).collect();
        for j in 0..n - 1 {
            grad[j] -= yb[j].trace().re;
            for l in 0..=j {
                let h = (&yb[j] * &yb[l]).trace().re;
                hess[(j, l)] += h;
                if l != j {
                    hess[(l, j)] += h;
                }
            }
        }
        (grad, hess)
    }
}

/// Optimal value, accurate to `gap_tol` absolute.
pub fn solve(inst: &Instance, gap_tol: f64) -> f64 {
    let b = Barrier::new(inst);
    let mut z = DVector::zeros(b.n);
    // X = I is interior when the main-lobe floor is below M / σ̃.
    let t0 = inst
        .sidelobe
        .iter()
        .map(|(a, s)| a.iter().map(|v| v.norm_sqr()).sum::<f64>() / s)
        .fold(0.0, f64::max);
    z[b.n - 1] = 2.0 * t0 + 1.0;
    assert!(b.value(1.0, &z).is_some(), "identity start is not interior");

    let nu = (b.cons.len() + inst.m) as f64;
    let mut tau = 1.0;
    loop {
        for _ in 0..200 {
            let (grad, hess) = b.newton(tau, &z);
            // Cholesky can fail on rounding alone once τ is large.
            let rhs = -&grad;
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match hess.lu().solve(&rhs) {
                    Some(step) => step,
                    None => break,
                },
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let f0 = b.value(tau, &z).expect("iterate is interior");
            let mut s = 1.0;
            loop {
                let trial = &z + &step * s;
                if let Some(f) = b.value(tau, &trial) {
                    if f <= f0 - 0.25 * s * decrement {
                        z = trial;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    return b.objective(&z);
                }
            }
        }
        if nu / tau < gap_tol {
            return b.objective(&z);
        }
        tau *= 8.0;
    }
}
