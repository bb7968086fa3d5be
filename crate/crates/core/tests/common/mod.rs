//! Independent oracles shared by the integration tests: bitmask ladder algebra, a
//! term-by-term second-quantized Hamiltonian and dense Heisenberg-picture dynamics.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use subspec::fcidump::IntegralTable;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Ladder operator on an occupation bitmask, spin-orbital `2p + s`.
pub fn ladder(det: u128, create: bool, p: usize) -> Option<(u128, f64)> {
    let bit = 1u128 << p;
    let occupied = det & bit != 0;
    if occupied == create {
        return None;
    }
    let below = (det & (bit - 1)).count_ones();
    let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((det ^ bit, sign))
}

/// Apply an operator string written left to right; the rightmost factor acts first.
pub fn apply_string(det: u128, ops: &[(bool, usize)]) -> Option<(u128, f64)> {
    let mut d = det;
    let mut s = 1.0;
    for &(create, p) in ops.iter().rev() {
        let (nd, ns) = ladder(d, create, p)?;
        d = nd;
        s *= ns;
    }
    Some((d, s))
}

/// `<bra|H|ket>` for every `bra` reached from `ket`, summing the normal-ordered operator
/// `E_core + sum h_pq a+_ps a_qs + 1/2 sum (pq|rs) a+_ps a+_rt a_st a_qs` term by term.
pub fn brute_force_column(t: &IntegralTable, ket: u128) -> HashMap<u128, f64> {
    let n = t.norb;
    let mut out: HashMap<u128, f64> = HashMap::new();
    *out.entry(ket).or_default() += t.e_core;
    for s in 0..2 {
        for p in 0..n {
            for q in 0..n {
                let v = t.h1(p, q);
                if v == 0.0 {
                    continue;
                }
                if let Some((d, sg)) = apply_string(ket, &[(true, 2 * p + s), (false, 2 * q + s)]) {
                    *out.entry(d).or_default() += v * sg;
                }
            }
        }
    }
    for s in 0..2 {
        for u in 0..2 {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for w in 0..n {
                            let v = t.eri(p, q, r, w);
                            if v == 0.0 {
                                continue;
                            }
                            let ops = [
                                (true, 2 * p + s),
                                (true, 2 * r + u),
                                (false, 2 * w + u),
                                (false, 2 * q + s),
                            ];
                            if let Some((d, sg)) = apply_string(ket, &ops) {
                                *out.entry(d).or_default() += 0.5 * v * sg;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// All bitmasks with `n_up` even bits and `n_down` odd bits set among `2 norb`.
pub fn sector_masks(norb: usize, n_up: usize, n_down: usize) -> Vec<u128> {
    (0u128..1 << (2 * norb))
        .filter(|&d| {
            let up = (0..norb).filter(|p| d >> (2 * p) & 1 == 1).count();
            let dn = (0..norb).filter(|p| d >> (2 * p + 1) & 1 == 1).count();
            up == n_up && dn == n_down
        })
        .collect()
}

pub fn dense_hamiltonian(t: &IntegralTable, basis: &[u128]) -> DMatrix<f64> {
    let index: HashMap<u128, usize> = basis.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut h = DMatrix::zeros(basis.len(), basis.len());
    for (j, &ket) in basis.iter().enumerate() {
        for (bra, v) in brute_force_column(t, ket) {
            h[(index[&bra], j)] += v;
        }
    }
    h
}

/// `exp(-i H dt)` from a symmetric eigendecomposition.
pub fn step_matrix(h: &DMatrix<f64>, dt: f64) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)),
    );
    &v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Ground state of the sector `(n_up, n_down)` by dense diagonalization.
pub fn ground_state(t: &IntegralTable, n_up: usize, n_down: usize) -> (Vec<u128>, f64, DVector<f64>) {
    let basis = sector_masks(t.norb, n_up, n_down);
    let eig = dense_hamiltonian(t, &basis).symmetric_eigen();
    let k = eig.eigenvalues.imin();
    (basis, eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// `G_A(t_k) = <Psi0| e^{iHt} A† e^{-iHt} A |Psi0>` at `t_k = k dt`, `k = -n..=n`.
///
/// Both factors are stepped explicitly in their own particle sectors; nothing about
/// the ground energy or the spectral decomposition is assumed.
pub fn heisenberg_correlator(t: &IntegralTable, ops: &[(bool, usize)], dt: f64, n: usize) -> Vec<Complex64> {
    let n_up = (t.nelec as i64 + t.ms2) as usize / 2;
    let n_down = t.nelec - n_up;
    let (basis0, _, psi0) = ground_state(t, n_up, n_down);
    let (du, dd) = ops.iter().fold((0i64, 0i64), |(u, d), &(c, p)| {
        let s = if c { 1 } else { -1 };
        if p % 2 == 0 { (u + s, d) } else { (u, d + s) }
    });
    let basis1 = sector_masks(t.norb, (n_up as i64 + du) as usize, (n_down as i64 + dd) as usize);
    let index1: HashMap<u128, usize> = basis1.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    // Matrix of A from sector 0 into sector 1.
    let mut a = DMatrix::<Complex64>::zeros(basis1.len(), basis0.len());
    for (j, &d) in basis0.iter().enumerate() {
        if let Some((nd, s)) = apply_string(d, ops) {
            a[(index1[&nd], j)] += Complex64::new(s, 0.0);
        }
    }
    // A common energy shift cancels exactly in G_A and keeps the stepped phases small.
    let mut h0 = dense_hamiltonian(t, &basis0);
    let mut h1 = dense_hamiltonian(t, &basis1);
    let shift = h0.diagonal().min();
    for i in 0..basis0.len() {
        h0[(i, i)] -= shift;
    }
    for i in 0..basis1.len() {
        h1[(i, i)] -= shift;
    }
    let psi0c = psi0.map(|x| Complex64::new(x, 0.0));
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
    for (sign, dir) in [(1.0, 1i64), (-1.0, -1i64)] {
        let u0 = step_matrix(&h0, sign * dt);
        let u1 = step_matrix(&h1, sign * dt);
        let mut g = psi0c.clone();
        let mut phi = &a * &psi0c;
        for k in 0..=n {
            let aphi = a.adjoint() * &phi;
            let idx = (n as i64 + dir * k as i64) as usize;
            out[idx] = g.dotc(&aphi);
            g = &u0 * g;
            phi = &u1 * phi;
        }
    }
    out
}
