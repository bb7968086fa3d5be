//! `psi(t) = exp(-i H t) psi(0)` by dense eigendecomposition or adaptive Krylov steps.

use std::borrow::Cow;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::DenseEigen;
use crate::error::{Error, Result};
use crate::fock::CsrMatrix;

pub trait Propagator: Sync {
    fn dim(&self) -> usize;

    fn propagate(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>>;

    /// States at every entry of `times`, in the given order.
    fn trajectory(&self, psi: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = psi.to_vec();
        let mut t_cur = 0.0;
        for &t in times {
            cur = self.propagate(&cur, t - t_cur)?;
            t_cur = t;
            out.push(cur.clone());
        }
        Ok(out)
    }
}

impl Propagator for DenseEigen {
    fn dim(&self) -> usize {
        DenseEigen::dim(self)
    }

    fn propagate(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let mut c = self.coefficients(psi);
        for (ck, &l) in c.iter_mut().zip(&self.values) {
            *ck *= Complex64::from_polar(1.0, -l * t);
        }
        Ok(self.synthesize(&c))
    }

    fn trajectory(&self, psi: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let c0 = self.coefficients(psi);
        let n = c0.len();
        let nt = times.len();
        // One matrix product for all times instead of a matrix-vector product each.
        let mut cr = DMatrix::<f64>::zeros(n, nt);
        let mut ci = DMatrix::<f64>::zeros(n, nt);
        for (j, &t) in times.iter().enumerate() {
            for (k, (c, &l)) in c0.iter().zip(&self.values).enumerate() {
                let z = c * Complex64::from_polar(1.0, -l * t);
                cr[(k, j)] = z.re;
                ci[(k, j)] = z.im;
            }
        }
        let vr = &self.vectors * cr;
        let vi = &self.vectors * ci;
        Ok((0..nt)
            .map(|j| {
                vr.column(j)
                    .iter()
                    .zip(vi.column(j).iter())
                    .map(|(&r, &i)| Complex64::new(r, i))
                    .collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Krylov subspace dimension per step.
    pub subspace: usize,
    /// Per-step error bound relative to the vector norm.
    pub tol: f64,
    /// Smallest admissible step before giving up.
    pub min_step: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            subspace: 30,
            tol: 1e-10,
            min_step: 1e-8,
        }
    }
}

/// Short-iterative Lanczos propagator.
pub struct KrylovPropagator<'a> {
    h: &'a CsrMatrix,
    opts: KrylovOptions,
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

struct KrylovBasis {
    q: Vec<Vec<Complex64>>,
    theta: Vec<f64>,
    s: DMatrix<f64>,
    /// Norm of the residual beyond the last basis vector; zero on breakdown.
    beta_next: f64,
}

impl KrylovBasis {
    /// Coefficients of `exp(-i T tau) e_1` in the Lanczos basis.
    fn coefficients(&self, tau: f64) -> Vec<Complex64> {
        let m = self.theta.len();
        let phases: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(self.s[(0, k)], -self.theta[k] * tau))
            .collect();
        (0..m)
            .map(|j| (0..m).map(|k| phases[k] * self.s[(j, k)]).sum())
            .collect()
    }
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(h: &'a CsrMatrix, opts: KrylovOptions) -> Self {
        Self { h, opts }
    }

    fn basis(&self, v: &[Complex64], beta0: f64) -> KrylovBasis {
        let n = v.len();
        let m_max = self.opts.subspace.min(n).max(1);
        let mut q: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        let mut beta_next = 0.0;
        for k in 0..m_max {
            self.h.mul_vec(&q[k], &mut w);
            alpha.push(cdot(&q[k], &w).re);
            for _ in 0..2 {
                for qj in &q {
                    let c = cdot(qj, &w);
                    w.iter_mut().zip(qj).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = cnorm(&w);
            let scale = alpha.iter().fold(1.0f64, |acc, a| acc.max(a.abs()));
            if b <= 1e-13 * scale {
                beta_next = 0.0;
                break;
            }
            if k + 1 == m_max {
                beta_next = if m_max == n { 0.0 } else { b };
                break;
            }
            beta.push(b);
            q.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        q.truncate(m);
        KrylovBasis {
            q,
            theta: eig.eigenvalues.iter().copied().collect(),
            s: eig.eigenvectors,
            beta_next,
        }
    }
}

impl Propagator for KrylovPropagator<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn propagate(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let mut cur = psi.to_vec();
        let mut done = 0.0;
        let mut tau = t.abs();
        let dir = t.signum();
        while (t.abs() - done) > 0.0 {
            let beta0 = cnorm(&cur);
            if beta0 == 0.0 {
                break;
            }
            let kb = self.basis(&cur, beta0);
            let m = kb.theta.len();
            tau = tau.min(t.abs() - done);
            let coeffs = loop {
                let c = kb.coefficients(dir * tau);
                let err = kb.beta_next * c[m - 1].norm();
                if err <= self.opts.tol {
                    break c;
                }
                tau *= 0.5;
                if tau < self.opts.min_step {
                    return Err(Error::StepUnderflow {
                        t: dir * done,
                        remaining: dir * (t.abs() - done),
                    });
                }
            };
            let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
            for (qj, cj) in kb.q.iter().zip(&coeffs) {
                let f = cj * beta0;
                next.iter_mut().zip(qj).for_each(|(x, y)| *x += f * y);
            }
            cur = next;
            done += tau;
            if t.abs() - done < 1e-14 * t.abs().max(1.0) {
                break;
            }
            // Try a larger step next time; halving above brings it back if needed.
            tau *= 2.0;
        }
        Ok(cur)
    }
}

/// Dense when `dim <= dense_cap`, Krylov otherwise.
pub enum Engine<'a> {
    Dense(Cow<'a, DenseEigen>),
    Krylov(KrylovPropagator<'a>),
}

impl<'a> Engine<'a> {
    pub fn new(h: &'a CsrMatrix, dense_cap: usize) -> Result<Self> {
        if h.dim() <= dense_cap {
            Ok(Self::Dense(Cow::Owned(DenseEigen::from_csr(h, dense_cap)?)))
        } else {
            Ok(Self::Krylov(KrylovPropagator::new(h, KrylovOptions::default())))
        }
    }

    /// Reuse an existing decomposition.
    pub fn from_dense(eig: &'a DenseEigen) -> Self {
        Self::Dense(Cow::Borrowed(eig))
    }

    pub fn as_dense(&self) -> Option<&DenseEigen> {
        match self {
            Self::Dense(e) => Some(e),
            Self::Krylov(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Dense(_) => "dense",
            Self::Krylov(_) => "krylov",
        }
    }
}

impl Propagator for Engine<'_> {
    fn dim(&self) -> usize {
        match self {
            Self::Dense(e) => Propagator::dim(e.as_ref()),
            Self::Krylov(k) => k.dim(),
        }
    }

    fn propagate(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        match self {
            Self::Dense(e) => e.propagate(psi, t),
            Self::Krylov(k) => k.propagate(psi, t),
        }
    }

    fn trajectory(&self, psi: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        match self {
            Self::Dense(e) => e.trajectory(psi, times),
            Self::Krylov(k) => k.trajectory(psi, times),
        }
    }
}
