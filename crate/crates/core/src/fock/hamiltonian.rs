//! Slater–Condon matrix elements of the second-quantized electronic Hamiltonian
//!
//! `H = E_core + sum_pq h_pq c†_p c_q + 1/2 sum_pqrs <pq|rs> c†_p c†_q c_s c_r`
//!
//! over interleaved spin-orbitals, with `<pq|rs> = (pr|qs) δ(σp,σr) δ(σq,σs)` built
//! from the chemists'-notation integrals of an [`IntegralTable`].

use num_complex::Complex64;

use super::{apply_ladder, Determinant, Ladder};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;
use crate::parallel;

/// Entries smaller than this are not stored.
pub const DROP_TOL: f64 = 1e-14;

/// Matrix-element evaluator over one integral table.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian<'a> {
    pub table: &'a IntegralTable,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(table: &'a IntegralTable) -> Self {
        Self { table }
    }

    #[inline]
    fn h1(&self, p: usize, q: usize) -> f64 {
        if p % 2 != q % 2 {
            0.0
        } else {
            self.table.h1(p / 2, q / 2)
        }
    }

    /// Antisymmetrized `<pq||rs>` over spin-orbitals.
    #[inline]
    fn anti(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let t = self.table;
        let mut v = 0.0;
        if p % 2 == r % 2 && q % 2 == s % 2 {
            v += t.eri(p / 2, r / 2, q / 2, s / 2);
        }
        if p % 2 == s % 2 && q % 2 == r % 2 {
            v -= t.eri(p / 2, s / 2, q / 2, r / 2);
        }
        v
    }

    pub fn diagonal(&self, d: Determinant) -> f64 {
        let t = self.table;
        let occ: Vec<usize> = d.occupied().collect();
        let mut e = t.e_core;
        for (k, &i) in occ.iter().enumerate() {
            e += t.h1(i / 2, i / 2);
            for &j in &occ[k + 1..] {
                e += t.eri(i / 2, i / 2, j / 2, j / 2);
                if i % 2 == j % 2 {
                    e -= t.eri(i / 2, j / 2, j / 2, i / 2);
                }
            }
        }
        e
    }

    /// `<bra|H|ket>` for determinants of the same sector; no sector check.
    pub fn element(&self, bra: Determinant, ket: Determinant) -> f64 {
        let diff = bra.bits() ^ ket.bits();
        match diff.count_ones() {
            0 => self.diagonal(bra),
            2 => {
                let i = (ket.bits() & diff).trailing_zeros() as usize;
                let p = (bra.bits() & diff).trailing_zeros() as usize;
                if i % 2 != p % 2 {
                    return 0.0;
                }
                let (mid, s1) = apply_ladder(ket, Ladder::Annihilate, i).expect("i occupied in ket");
                let (_, s2) = apply_ladder(mid, Ladder::Create, p).expect("p empty in ket");
                let mut v = self.h1(p, i);
                for j in mid.occupied() {
                    v += self.anti(p, j, i, j);
                }
                s1 * s2 * v
            }
            4 => {
                let holes = ket.bits() & diff;
                let parts = bra.bits() & diff;
                let i = holes.trailing_zeros() as usize;
                let j = (holes & (holes - 1)).trailing_zeros() as usize;
                let p = parts.trailing_zeros() as usize;
                let q = (parts & (parts - 1)).trailing_zeros() as usize;
                let v = self.anti(p, q, i, j);
                if v == 0.0 {
                    return 0.0;
                }
                // c†_p c†_q c_j c_i |ket> = s |bra>
                let mut d = ket;
                let mut s = 1.0;
                for (kind, orb) in [
                    (Ladder::Annihilate, i),
                    (Ladder::Annihilate, j),
                    (Ladder::Create, q),
                    (Ladder::Create, p),
                ] {
                    let (nd, sg) = apply_ladder(d, kind, orb).expect("valid double excitation");
                    d = nd;
                    s *= sg;
                }
                s * v
            }
            _ => 0.0,
        }
    }
}

/// `<a|H|b>` including the core energy on the diagonal.
pub fn slater_condon_element(t: &IntegralTable, a: Determinant, b: Determinant) -> Result<f64> {
    if a.n_up() != b.n_up() || a.n_down() != b.n_down() {
        return Err(Error::SectorMismatch);
    }
    let limit = 2 * t.norb;
    if limit < 128 && (a.bits() | b.bits()) >> limit != 0 {
        return Err(Error::Sector(format!(
            "determinant uses spin-orbitals beyond 2 * {}",
            t.norb
        )));
    }
    Ok(Hamiltonian::new(t).element(a, b))
}

/// Compressed sparse row matrix with real entries; both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// From per-row `(col, value)` lists; columns need not be sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut r in rows {
            r.sort_unstable_by_key(|e| e.0);
            for (c, v) in r {
                assert!(c < n, "column {c} out of range");
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n);
        Self::from_rows(
            (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| data[i * n + j] != 0.0)
                        .map(|j| (j, data[i * n + j]))
                        .collect()
                })
                .collect(),
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[i * self.n + j] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `y = H x`.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in self.cols[r.clone()].iter().zip(&self.vals[r]) {
                acc += x[*c] * *v;
            }
            *yi = acc;
        }
    }

    pub fn mul_vec_real(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[r.clone()]
                .iter()
                .zip(&self.vals[r])
                .map(|(c, v)| x[*c] * v)
                .sum();
        }
    }

    /// `<x|H|x>` for a complex vector.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Matrix of `H` over an ordered, duplicate-free list of same-sector determinants.
/// Only the upper triangle is evaluated and mirrored, so the result is exactly symmetric.
pub fn build_hamiltonian(t: &IntegralTable, dets: &[Determinant]) -> Result<CsrMatrix> {
    let mut sorted = dets.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateDeterminant(w[0].to_string()));
    }
    if let Some(first) = dets.first() {
        if dets
            .iter()
            .any(|d| d.n_up() != first.n_up() || d.n_down() != first.n_down())
        {
            return Err(Error::SectorMismatch);
        }
        slater_condon_element(t, *first, *first)?;
    }
    let h = Hamiltonian::new(t);
    let n = dets.len();
    let upper: Vec<Vec<(usize, f64)>> = parallel::map_range(n, |i| {
        let a = dets[i];
        (i..n)
            .filter(|&j| a.distance(dets[j]) <= 4)
            .filter_map(|j| {
                let v = h.element(a, dets[j]);
                (v.abs() >= DROP_TOL).then_some((j, v))
            })
            .collect()
    });
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in upper.into_iter().enumerate() {
        for (j, v) in r {
            rows[i].push((j, v));
            if j != i {
                rows[j].push((i, v));
            }
        }
    }
    Ok(CsrMatrix::from_rows(rows))
}
