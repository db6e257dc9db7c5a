//! Conjugate-gradient ascent on the product of `N` complex unit circles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::CVector;
use crate::error::{Error, Result};

/// Below this magnitude `v_n + t_n` is treated as a degenerate retraction.
pub const RETRACTION_FLOOR: f64 = 1e-14;

/// Negative-semidefinite Hermitian part of a quadratic objective.
#[derive(Debug, Clone)]
pub enum QuadraticForm {
    Dense(DMatrix<Complex64>),
    /// `Q = −Σ_i w_i g_i g_iᴴ` with non-negative weights.
    LowRank {
        vectors: Vec<CVector>,
        weights: Vec<f64>,
    },
}

impl QuadraticForm {
    pub fn dim(&self) -> Option<usize> {
        match self {
            QuadraticForm::Dense(q) => Some(q.nrows()),
            QuadraticForm::LowRank { vectors, .. } => vectors.first().map(|g| g.len()),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            QuadraticForm::Dense(q) => q * v,
            QuadraticForm::LowRank { vectors, weights } => {
                let mut out = CVector::zeros(v.len());
                for (g, w) in vectors.iter().zip(weights) {
                    let c = g.dotc(v) * *w;
                    out.axpy(-c, g, Complex64::new(1.0, 0.0));
                }
                out
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<Complex64> {
        match self {
            QuadraticForm::Dense(q) => q.clone(),
            QuadraticForm::LowRank { vectors, weights } => {
                let mut q = DMatrix::zeros(n, n);
                for (g, w) in vectors.iter().zip(weights) {
                    q -= g * g.adjoint() * Complex64::new(*w, 0.0);
                }
                q
            }
        }
    }
}

/// `f(v) = vᴴQv + 2Re{qᴴv}` with `Q ⪯ 0`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub form: QuadraticForm,
    pub linear: CVector,
}

impl QuadraticObjective {
    /// Dense constructor; checks Hermitian symmetry and `λ_max ≤ 1e−9` in debug builds.
    pub fn dense(q: DMatrix<Complex64>, linear: CVector) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != linear.len() {
            return Err(Error::InvalidArgument("quadratic dimensions disagree".into()));
        }
        let herm = (&q - q.adjoint()).norm();
        if herm > 1e-9 * q.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!("Q is not Hermitian ({herm:.3e})")));
        }
        #[cfg(debug_assertions)]
        {
            let top = hermitian_max_eigenvalue(&q);
            if top > 1e-9 * q.norm().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "Q is not negative semidefinite ({top:.3e})"
                )));
            }
        }
        Ok(Self {
            form: QuadraticForm::Dense(q),
            linear,
        })
    }

    pub fn low_rank(vectors: Vec<CVector>, weights: Vec<f64>, linear: CVector) -> Result<Self> {
        if vectors.len() != weights.len() || vectors.iter().any(|g| g.len() != linear.len()) {
            return Err(Error::InvalidArgument("low-rank factor dimensions disagree".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("low-rank weights must be non-negative".into()));
        }
        Ok(Self {
            form: QuadraticForm::LowRank { vectors, weights },
            linear,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, v: &CVector) -> f64 {
        let qv = self.form.apply(v);
        v.dotc(&qv).re + 2.0 * self.linear.dotc(v).re
    }

    /// Euclidean gradient `2Qv + 2q`.
    pub fn euclidean_gradient(&self, v: &CVector) -> CVector {
        (self.form.apply(v) + &self.linear) * Complex64::new(2.0, 0.0)
    }
}

/// Largest eigenvalue of a Hermitian matrix via its real symmetric embedding.
pub fn hermitian_max_eigenvalue(q: &DMatrix<Complex64>) -> f64 {
    let n = q.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = q[(i, j)];
            big[(i, j)] = z.re;
            big[(i + n, j + n)] = z.re;
            big[(i, j + n)] = -z.im;
            big[(i + n, j)] = z.im;
        }
    }
    big.symmetric_eigenvalues().max()
}

/// `t = g − Re{g ⊙ v*} ⊙ v`.
pub fn tangent_project(v: &CVector, g: &CVector) -> CVector {
    v.zip_map(g, |vn, gn| gn - vn * (gn * vn.conj()).re)
}

/// `(v + t) / |v + t|` entrywise.
pub fn retract(v: &CVector, t: &CVector) -> Result<CVector> {
    let mut out = v + t;
    for (n, x) in out.iter_mut().enumerate() {
        let a = x.norm();
        if a < RETRACTION_FLOOR {
            return Err(Error::StepRejected { index: n });
        }
        *x /= a;
    }
    Ok(out)
}

/// Riemannian inner product `Re{aᴴb}`.
fn inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcgControls {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below `tol_per_element · N`.
    pub tol_per_element: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for RcgControls {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol_per_element: 1e-6,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub v: CVector,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes a quadratic objective over unit-modulus vectors.
///
/// Polak–Ribière+ directions with a steepest-ascent reset, Armijo
/// backtracking and projection transport.
pub fn rcg_maximize(obj: &QuadraticObjective, v0: &CVector, controls: &RcgControls) -> RcgOutcome {
    let n = obj.dim();
    let tol = controls.tol_per_element * n as f64;
    let mut v = v0.map(|x| {
        let a = x.norm();
        if a > 0.0 {
            x / a
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    let mut f = obj.value(&v);
    let mut trace = vec![f];
    let mut grad = tangent_project(&v, &obj.euclidean_gradient(&v));
    let mut dir = grad.clone();
    let mut iterations = 0;
    let mut converged = grad.norm() < tol;

    while !converged && iterations < controls.max_iters {
        let mut slope = inner(&grad, &dir);
        if slope <= 0.0 {
            dir = grad.clone();
            slope = inner(&grad, &grad);
        }
        let mut step = controls.initial_step;
        let mut accepted = None;
        for _ in 0..controls.max_backtracks {
            let trial = dir.map(|x| x * step);
            if let Ok(cand) = retract(&v, &trial) {
                let fc = obj.value(&cand);
                if fc >= f + controls.armijo * step * slope {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= controls.shrink;
        }
        let Some((v_new, f_new)) = accepted else {
            break;
        };
        iterations += 1;
        let grad_new = tangent_project(&v_new, &obj.euclidean_gradient(&v_new));
        let grad_old_t = tangent_project(&v_new, &grad);
        let dir_old_t = tangent_project(&v_new, &dir);
        let denom = inner(&grad, &grad);
        let beta = if denom > 0.0 {
            (inner(&grad_new, &(&grad_new - &grad_old_t)) / denom).max(0.0)
        } else {
            0.0
        };
        dir = &grad_new + dir_old_t * Complex64::new(beta, 0.0);
        if inner(&grad_new, &dir) <= 0.0 {
            dir = grad_new.clone();
        }
        v = v_new;
        f = f_new;
        grad = grad_new;
        trace.push(f);
        converged = grad.norm() < tol;
    }

    RcgOutcome {
        v,
        trace,
        iterations,
        converged,
    }
}

pub fn random_phases<R: rand::Rng>(n: usize, rng: &mut R) -> CVector {
    DVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}
