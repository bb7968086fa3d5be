use std::sync::Arc;

use num_complex::Complex64;

use super::{Determinant, Sector};

/// Complex amplitudes over the determinants of one sector.
#[derive(Debug, Clone)]
pub struct SectorWaveFunction {
    pub sector: Arc<Sector>,
    pub amps: Vec<Complex64>,
}

impl SectorWaveFunction {
    pub fn zeros(sector: Arc<Sector>) -> Self {
        let n = sector.len();
        Self {
            sector,
            amps: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Unit vector on `d`; `None` if `d` is not in the sector.
    pub fn basis(sector: Arc<Sector>, d: Determinant) -> Option<Self> {
        let i = sector.index_of(d)?;
        let mut wf = Self::zeros(sector);
        wf.amps[i] = Complex64::new(1.0, 0.0);
        Some(wf)
    }

    pub fn from_real(sector: Arc<Sector>, amps: &[f64]) -> Self {
        assert_eq!(sector.len(), amps.len());
        Self {
            sector,
            amps: amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        }
    }

    /// `<x|psi>`, zero outside the sector.
    pub fn amplitude(&self, d: Determinant) -> Complex64 {
        self.sector
            .index_of(d)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amps[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Scales to unit norm and returns the norm before scaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
        n
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-12
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SectorWaveFunction) -> Complex64 {
        debug_assert_eq!(self.amps.len(), other.amps.len());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Determinants with `|amp| >= cutoff`, in sector order.
    pub fn support(&self, cutoff: f64) -> Vec<Determinant> {
        self.sector
            .dets()
            .iter()
            .zip(&self.amps)
            .filter(|(_, a)| a.norm() >= cutoff)
            .map(|(d, _)| *d)
            .collect()
    }
}
