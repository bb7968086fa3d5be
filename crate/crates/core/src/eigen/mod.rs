//! Ground states, reference spectra and time propagation.

mod lanczos;
mod propagate;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{CsrMatrix, Sector, SectorWaveFunction};

pub use lanczos::{lanczos_ground_state, LanczosOptions};
pub use propagate::{Engine, KrylovOptions, KrylovPropagator, Propagator};

/// Dimension up to which the ground state is found by dense diagonalization.
pub const DENSE_GROUND_CAP: usize = 2000;
/// Dimension up to which dense propagation is used by default.
pub const DENSE_PROPAGATION_CAP: usize = 2000;
/// Largest matrix `full_spectrum` will diagonalize.
pub const FULL_SPECTRUM_CAP: usize = 20000;

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// Column `n` is the eigenvector of `values[n]`.
    pub vectors: DMatrix<f64>,
}

impl DenseEigen {
    pub fn from_dense(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: DMatrix::zeros(0, 0),
            };
        }
        // Symmetrize against round-off in callers that assemble by hand.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        // Remove the mean diagonal first: absolute eigenvalue error scales with the
        // spectral radius, and molecular spectra sit far from zero.
        let shift = m.trace() / n as f64;
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k] + shift).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn from_csr(h: &CsrMatrix, cap: usize) -> Result<Self> {
        let n = h.dim();
        if n > cap {
            return Err(Error::SizeCap {
                what: "dense diagonalization",
                dim: n,
                cap,
            });
        }
        Ok(Self::from_dense(DMatrix::from_row_slice(n, n, &h.to_dense())))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector `n` as a plain vector.
    pub fn vector(&self, n: usize) -> Vec<f64> {
        self.vectors.column(n).iter().copied().collect()
    }

    /// `V^T psi`: expansion coefficients of `psi` in the eigenbasis.
    pub fn coefficients(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let re = DVector::from_iterator(psi.len(), psi.iter().map(|c| c.re));
        let im = DVector::from_iterator(psi.len(), psi.iter().map(|c| c.im));
        let cr = self.vectors.tr_mul(&re);
        let ci = self.vectors.tr_mul(&im);
        cr.iter()
            .zip(ci.iter())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    /// `V c`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.re));
        let im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.im));
        let vr = &self.vectors * re;
        let vi = &self.vectors * im;
        vr.iter()
            .zip(vi.iter())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }
}

/// Flip the sign so that the largest-magnitude entry is positive.
fn fix_phase(v: &mut [f64]) {
    let (mut best, mut idx) = (0.0, 0);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v.get(idx).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Lowest eigenpair: dense for `dim <= 2000`, Lanczos otherwise. The returned vector
/// has its largest-magnitude amplitude real and positive.
pub fn ground_state_vector(h: &CsrMatrix) -> Result<(f64, Vec<f64>)> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::Sector("empty Hamiltonian".into()));
    }
    let (e0, mut v) = if n <= DENSE_GROUND_CAP {
        let eig = DenseEigen::from_csr(h, DENSE_GROUND_CAP)?;
        (eig.values[0], eig.vector(0))
    } else {
        lanczos_ground_state(h, &LanczosOptions::default())?
    };
    fix_phase(&mut v);
    Ok((e0, v))
}

pub fn ground_state(h: &CsrMatrix, sector: Arc<Sector>) -> Result<(f64, SectorWaveFunction)> {
    if h.dim() != sector.len() {
        return Err(Error::Sector(format!(
            "matrix dimension {} does not match sector size {}",
            h.dim(),
            sector.len()
        )));
    }
    let (e0, v) = ground_state_vector(h)?;
    Ok((e0, SectorWaveFunction::from_real(sector, &v)))
}

/// Exact spectral decomposition of a perturbed state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReference {
    pub energies: Vec<f64>,
    /// `|<psi_A|E_n>|^2` per eigenstate.
    pub amplitudes: Vec<f64>,
    pub e0: f64,
}

impl SpectrumReference {
    pub fn from_eigen(eig: &DenseEigen, psi_a: &[Complex64], e0: f64) -> Self {
        let amplitudes = eig.coefficients(psi_a).iter().map(|c| c.norm_sqr()).collect();
        Self {
            energies: eig.values.clone(),
            amplitudes,
            e0,
        }
    }

    /// Override the ground energy, e.g. when `psi_A` lives in a different sector.
    pub fn with_ground_energy(mut self, e0: f64) -> Self {
        self.e0 = e0;
        self
    }

    /// `(E_n - E_0, weight_n)` with weights scaled by `<A†A>`; degenerate levels
    /// (within `degeneracy_tol`) are merged and their weights summed.
    pub fn lines(&self, a_norm2: f64, degeneracy_tol: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (&e, &w) in self.energies.iter().zip(&self.amplitudes) {
            let gap = e - self.e0;
            match out.last_mut() {
                Some((g, acc)) if (gap - *g).abs() <= degeneracy_tol => *acc += w * a_norm2,
                _ => out.push((gap, w * a_norm2)),
            }
        }
        out
    }
}

/// All eigenvalues of `h` and the overlaps of `psi_a` with each eigenvector.
pub fn full_spectrum(h: &CsrMatrix, psi_a: &[Complex64]) -> Result<SpectrumReference> {
    let eig = DenseEigen::from_csr(h, FULL_SPECTRUM_CAP)?;
    let e0 = eig.values[0];
    Ok(SpectrumReference::from_eigen(&eig, psi_a, e0))
}
