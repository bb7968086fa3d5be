//! Lanczos with full reorthogonalization for the lowest eigenpair.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::CsrMatrix;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Required `||H v - E v||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Ritz values are re-evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            check_every: 5,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic start vector: peaked on the lowest diagonal entry with a small
/// pseudo-random admixture so that no symmetry sector is excluded by accident.
fn start_vector(h: &CsrMatrix) -> Vec<f64> {
    let diag = h.diagonal();
    let imin = diag
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut v: Vec<f64> = (0..h.dim())
        .map(|_| {
            // splitmix64
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            1e-3 * ((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect();
    v[imin] += 1.0;
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
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
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (
        eig.eigenvalues[imin],
        eig.eigenvectors.column(imin).iter().copied().collect(),
    )
}

/// Lowest eigenpair of a real symmetric sparse matrix.
pub fn lanczos_ground_state(h: &CsrMatrix, opts: &LanczosOptions) -> Result<(f64, Vec<f64>)> {
    let n = h.dim();
    let mut basis: Vec<Vec<f64>> = vec![start_vector(h)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut best = f64::INFINITY;
    let cap = opts.max_iter.min(n);

    for k in 0..cap {
        h.mul_vec_real(&basis[k], &mut w);
        let a = dot(&basis[k], &w);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let exhausted = b < 1e-12 || k + 1 == cap;
        if exhausted || (k + 1) % opts.check_every == 0 {
            let (theta, s) = lowest_ritz(&alpha, &beta);
            let estimate = b * s[k].abs();
            if exhausted || estimate < 0.1 * opts.tol {
                let mut y = vec![0.0; n];
                for (q, c) in basis.iter().zip(&s) {
                    y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += c * qi);
                }
                let ny = norm(&y);
                y.iter_mut().for_each(|x| *x /= ny);
                let mut hy = vec![0.0; n];
                h.mul_vec_real(&y, &mut hy);
                let resid = hy
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - theta * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(resid);
                if resid <= opts.tol {
                    return Ok((theta, y));
                }
                if exhausted {
                    break;
                }
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::NoConvergence {
        iterations: alpha.len(),
        residual: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::DenseEigen;

    fn chain(n: usize) -> CsrMatrix {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = (i as f64 * 0.37).sin() * 2.0;
            if i + 1 < n {
                d[i * n + i + 1] = -1.0;
                d[(i + 1) * n + i] = -1.0;
            }
            if i + 7 < n {
                d[i * n + i + 7] = 0.3;
                d[(i + 7) * n + i] = 0.3;
            }
        }
        CsrMatrix::from_dense(n, &d)
    }

    #[test]
    fn matches_dense() {
        let h = chain(150);
        let (e, v) = lanczos_ground_state(&h, &LanczosOptions::default()).unwrap();
        let dense = DenseEigen::from_csr(&h, 1000).unwrap();
        assert!((e - dense.values[0]).abs() < 1e-10);
        let overlap: f64 = v.iter().zip(dense.vector(0)).map(|(a, b)| a * b).sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tiny_matrix_exhausts_space() {
        let h = CsrMatrix::from_dense(2, &[1.0, 0.5, 0.5, -1.0]);
        let (e, _) = lanczos_ground_state(&h, &LanczosOptions::default()).unwrap();
        assert!((e - -(1.25f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let h = chain(400);
        let opts = LanczosOptions {
            max_iter: 3,
            ..Default::default()
        };
        match lanczos_ground_state(&h, &opts) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual.is_finite() && residual > 1e-8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
