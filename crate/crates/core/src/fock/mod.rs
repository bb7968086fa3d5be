//! Occupation-number basis: determinants, particle-number sectors, ladder
//! operators and the Hamiltonian matrix in that basis.
//!
//! Spin-orbitals are interleaved, `p = 2 * spatial + spin` with spin 0 = up and
//! 1 = down, so the up and down electron counts are masked popcounts of one word.
//! A determinant with occupation bits `x` is the state
//! `c†_{p_1} c†_{p_2} ... c†_{p_n} |vac>` with `p_1 < p_2 < ... < p_n`, which fixes
//! every fermionic sign below.

mod hamiltonian;
mod operator;
mod wavefunction;

use std::fmt;

use crate::error::{Error, Result};

pub use hamiltonian::{
    build_hamiltonian, slater_condon_element, CsrMatrix, Hamiltonian,
};
pub use operator::{ExcitationOperator, Factor};
pub use wavefunction::SectorWaveFunction;

/// Largest number of spatial orbitals a [`Determinant`] can address.
pub const MAX_ORBITALS: usize = 64;

const UP_MASK: u128 = 0x5555_5555_5555_5555_5555_5555_5555_5555;
const DOWN_MASK: u128 = !UP_MASK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Interleaved spin-orbital index.
#[inline]
pub fn spin_orbital(spatial: usize, spin: Spin) -> usize {
    2 * spatial + spin as usize
}

/// Occupation bitstring over up to 128 spin-orbitals; bit `p` set iff `p` is occupied.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Determinant(pub u128);

impl Determinant {
    pub fn from_spin_orbitals(occupied: impl IntoIterator<Item = usize>) -> Self {
        Determinant(occupied.into_iter().fold(0u128, |acc, p| acc | (1u128 << p)))
    }

    #[inline]
    pub fn bits(self) -> u128 {
        self.0
    }

    #[inline]
    pub fn is_occupied(self, p: usize) -> bool {
        (self.0 >> p) & 1 == 1
    }

    #[inline]
    pub fn n_up(self) -> u32 {
        (self.0 & UP_MASK).count_ones()
    }

    #[inline]
    pub fn n_down(self) -> u32 {
        (self.0 & DOWN_MASK).count_ones()
    }

    #[inline]
    pub fn n_electrons(self) -> u32 {
        self.0.count_ones()
    }

    /// Occupied spin-orbitals in increasing order.
    pub fn occupied(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(p)
            }
        })
    }

    /// Number of occupied spin-orbitals with index below `p`.
    #[inline]
    pub fn occupied_below(self, p: usize) -> u32 {
        (self.0 & ((1u128 << p) - 1)).count_ones()
    }

    /// Number of spin-orbitals in which `self` and `other` differ.
    #[inline]
    pub fn distance(self, other: Determinant) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// Bitstring rendering, highest spin-orbital first.
    pub fn to_bitstring(self, n_spin_orbitals: usize) -> String {
        (0..n_spin_orbitals)
            .rev()
            .map(|p| if self.is_occupied(p) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Det({:#x})", self.0)
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Apply one ladder operator. Returns `None` when the result vanishes, otherwise the
/// new determinant and `(-1)^(occupied orbitals below p)`.
#[inline]
pub fn apply_ladder(d: Determinant, kind: Ladder, p: usize) -> Option<(Determinant, f64)> {
    let occupied = d.is_occupied(p);
    match (kind, occupied) {
        (Ladder::Create, true) | (Ladder::Annihilate, false) => None,
        _ => {
            let sign = if d.occupied_below(p).is_multiple_of(2) { 1.0 } else { -1.0 };
            Some((Determinant(d.0 ^ (1u128 << p)), sign))
        }
    }
}

/// All determinants with fixed per-spin electron counts, sorted by occupation word.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub norb: usize,
    pub n_up: usize,
    pub n_down: usize,
    dets: Vec<Determinant>,
}

impl Sector {
    #[inline]
    pub fn dets(&self) -> &[Determinant] {
        &self.dets
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dets.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    #[inline]
    pub fn index_of(&self, d: Determinant) -> Option<usize> {
        self.dets.binary_search(&d).ok()
    }

    #[inline]
    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.norb
    }

    pub fn contains(&self, d: Determinant) -> bool {
        self.index_of(d).is_some()
    }
}

/// `n`-bit masks with `k` bits set, ascending (Gosper's hack).
fn combinations(n: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    let limit: u128 = 1u128 << n;
    let mut out = Vec::new();
    let mut v: u64 = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    loop {
        if (v as u128) >= limit {
            break;
        }
        out.push(v);
        let c = v & v.wrapping_neg();
        let r = v.wrapping_add(c);
        if r == 0 {
            break;
        }
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// Spread spatial-orbital bits onto the interleaved spin-orbital word.
fn spread(mask: u64, spin: Spin) -> u128 {
    let mut out = 0u128;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out |= 1u128 << spin_orbital(i, spin);
        m &= m - 1;
    }
    out
}

pub fn enumerate_sector(norb: usize, n_up: usize, n_down: usize) -> Result<Sector> {
    if norb == 0 || norb > MAX_ORBITALS {
        return Err(Error::Sector(format!(
            "norb = {norb} outside 1..={MAX_ORBITALS}"
        )));
    }
    if n_up > norb || n_down > norb {
        return Err(Error::Sector(format!(
            "({n_up} up, {n_down} down) electrons in {norb} orbitals"
        )));
    }
    let ups: Vec<u128> = combinations(norb, n_up)
        .into_iter()
        .map(|m| spread(m, Spin::Up))
        .collect();
    let downs: Vec<u128> = combinations(norb, n_down)
        .into_iter()
        .map(|m| spread(m, Spin::Down))
        .collect();
    let mut dets: Vec<Determinant> = Vec::with_capacity(ups.len() * downs.len());
    for &u in &ups {
        for &d in &downs {
            dets.push(Determinant(u | d));
        }
    }
    dets.sort_unstable();
    Ok(Sector {
        norb,
        n_up,
        n_down,
        dets,
    })
}
