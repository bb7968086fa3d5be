//! Noise-free stand-in for the quantum processor: Born sampling of the perturbed state
//! and shot-sampled measurements of short-time evolutions of product states.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::Propagator;
use crate::error::{Error, Result};
use crate::fock::{Determinant, Sector, SectorWaveFunction};

/// Amplitudes with `|amp|^2` at or below this count as zero.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EmulatorConfig {
    /// Spacing between measurement rounds (a.u.).
    #[serde(default = "defaults::t_step")]
    pub t_step: f64,
    /// Rounds happen at `t = 0, t_step, ..., n_steps * t_step`.
    #[serde(default = "defaults::n_steps")]
    pub n_steps: usize,
    /// Projective measurements per round, drawn fresh each round.
    #[serde(default = "defaults::shots", rename = "shots")]
    pub shots_per_step: usize,
    #[serde(default)]
    pub seed: u64,
    /// Configurations drawn from `|psi_A|^2`.
    #[serde(default = "defaults::n_samples")]
    pub n_samples: usize,
}

mod defaults {
    pub fn t_step() -> f64 {
        1.0
    }
    pub fn n_steps() -> usize {
        10
    }
    pub fn shots() -> usize {
        4096
    }
    pub fn n_samples() -> usize {
        4096
    }
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            t_step: defaults::t_step(),
            n_steps: defaults::n_steps(),
            shots_per_step: defaults::shots(),
            seed: 0,
            n_samples: defaults::n_samples(),
        }
    }
}

impl EmulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_step > 0.0 && self.t_step.is_finite()) {
            return Err(Error::Config(format!("t-step must be positive, got {}", self.t_step)));
        }
        if self.shots_per_step == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n-samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Measurement times `j * t_step`, `j = 0..=n_steps`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| j as f64 * self.t_step).collect()
    }
}

/// Random-stream domains; each gets an independent key space.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Domain {
    Born = 1,
    Shots = 2,
    Diagnostics = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based generator keyed by `(seed, domain, key)` on stream `stream`.
/// The same key always yields the same sequence, independent of scheduling.
pub fn keyed_rng(seed: u64, domain: Domain, key: u128, stream: u64) -> ChaCha8Rng {
    let words = [seed, domain as u64, key as u64, (key >> 64) as u64];
    let mut bytes = [0u8; 32];
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for (i, w) in words.iter().enumerate() {
        h = splitmix(h ^ splitmix(*w ^ (i as u64).rotate_left(32)));
        bytes[8 * i..8 * i + 8].copy_from_slice(&h.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler over a fixed ordering.
#[derive(Debug, Clone)]
pub struct Categorical {
    cdf: Vec<f64>,
    last_nonzero: usize,
}

impl Categorical {
    /// `None` if all weights vanish.
    pub fn new(weights: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut acc = 0.0;
        let mut last_nonzero = None;
        let cdf: Vec<f64> = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                if w > 0.0 {
                    last_nonzero = Some(i);
                    acc += w;
                }
                acc
            })
            .collect();
        last_nonzero.map(|last_nonzero| Self { cdf, last_nonzero })
    }

    pub fn total(&self) -> f64 {
        self.cdf[self.last_nonzero]
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.cdf.partition_point(|&c| c <= u).min(self.last_nonzero)
    }
}

/// Unique sampled configurations with their multiplicities, in sector order.
#[derive(Debug, Clone, PartialEq)]
pub struct BornSamples {
    /// `(sector index, count)`.
    pub entries: Vec<(usize, u64)>,
    pub n_samples: usize,
}

impl BornSamples {
    pub fn weight(&self, k: usize) -> f64 {
        self.entries[k].1 as f64 / self.n_samples as f64
    }
}

/// `n_samples` i.i.d. draws from `|psi_A|^2` by inverse CDF over the sector ordering.
pub fn born_sample(psi: &SectorWaveFunction, n_samples: usize, seed: u64) -> BornSamples {
    let cat = Categorical::new(psi.amps.iter().map(|a| a.norm_sqr()))
        .expect("normalized state has nonzero weight");
    let mut rng = keyed_rng(seed, Domain::Born, 0, 0);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..n_samples {
        *counts.entry(cat.sample(&mut rng)).or_default() += 1;
    }
    BornSamples {
        entries: counts.into_iter().collect(),
        n_samples,
    }
}

/// Measured subspace `S_x` of one sampled configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSample {
    pub x: Determinant,
    /// Sector indices of the members, ascending; always contains `x`.
    pub members: Vec<usize>,
    /// Time of the first round in which each member was observed, aligned with `members`.
    pub first_hit: Vec<f64>,
}

impl SubspaceSample {
    pub fn dim(&self) -> usize {
        self.members.len()
    }

    /// The whole sector as the subspace.
    pub fn full(x: Determinant, sector: &Sector) -> Self {
        Self {
            x,
            members: (0..sector.len()).collect(),
            first_hit: vec![0.0; sector.len()],
        }
    }

    pub fn dets(&self, sector: &Sector) -> Vec<Determinant> {
        self.members.iter().map(|&i| sector.dets()[i]).collect()
    }
}

fn evolved_rounds(
    x_index: usize,
    engine: &dyn Propagator,
    times: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let mut e = vec![Complex64::new(0.0, 0.0); engine.dim()];
    e[x_index] = Complex64::new(1.0, 0.0);
    engine.trajectory(&e, times)
}

/// Measure `U(t_j)|x>` `shots_per_step` times in each round and collect every outcome.
///
/// Round `j` draws from its own stream, and shots within a round are consumed in
/// order, so increasing `shots_per_step` or `n_steps` only ever adds members.
pub fn measure_evolved(
    x: Determinant,
    sector: &Sector,
    engine: &dyn Propagator,
    cfg: &EmulatorConfig,
) -> Result<SubspaceSample> {
    let xi = sector
        .index_of(x)
        .ok_or_else(|| Error::Sector(format!("{x} is not in the sector")))?;
    let times = cfg.times();
    let states = evolved_rounds(xi, engine, &times)?;
    let mut hits: BTreeMap<usize, f64> = BTreeMap::new();
    hits.insert(xi, 0.0);
    for (j, (phi, &t)) in states.iter().zip(&times).enumerate() {
        let Some(cat) = Categorical::new(phi.iter().map(|a| a.norm_sqr())) else {
            continue;
        };
        let mut rng = keyed_rng(cfg.seed, Domain::Shots, x.0, j as u64);
        for _ in 0..cfg.shots_per_step {
            hits.entry(cat.sample(&mut rng)).or_insert(t);
        }
    }
    let (members, first_hit) = hits.into_iter().unzip();
    Ok(SubspaceSample {
        x,
        members,
        first_hit,
    })
}

/// `{ y : |<y|U(t)|x>|^2 > eps for some t in times }`, with first-hit times.
pub fn exact_support_with(
    x: Determinant,
    sector: &Sector,
    engine: &dyn Propagator,
    times: &[f64],
    eps: f64,
) -> Result<SubspaceSample> {
    let xi = sector
        .index_of(x)
        .ok_or_else(|| Error::Sector(format!("{x} is not in the sector")))?;
    let states = evolved_rounds(xi, engine, times)?;
    let mut hits: BTreeMap<usize, f64> = BTreeMap::new();
    hits.insert(xi, 0.0);
    for (phi, &t) in states.iter().zip(times) {
        for (i, a) in phi.iter().enumerate() {
            if a.norm_sqr() > eps {
                hits.entry(i).or_insert(t);
            }
        }
    }
    let (members, first_hit) = hits.into_iter().unzip();
    Ok(SubspaceSample {
        x,
        members,
        first_hit,
    })
}

pub fn exact_support(
    x: Determinant,
    sector: &Sector,
    engine: &dyn Propagator,
    times: &[f64],
) -> Result<SubspaceSample> {
    exact_support_with(x, sector, engine, times, SUPPORT_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_skips_zero_weights() {
        let cat = Categorical::new([0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let mut rng = keyed_rng(1, Domain::Born, 0, 0);
        for _ in 0..1000 {
            let k = cat.sample(&mut rng);
            assert!(k == 1 || k == 3);
        }
        assert!(Categorical::new([0.0, 0.0]).is_none());
    }

    #[test]
    fn keyed_streams_are_distinct_and_reproducible() {
        let draw = |s, d, k, st| keyed_rng(s, d, k, st).random::<u64>();
        assert_eq!(draw(1, Domain::Shots, 5, 0), draw(1, Domain::Shots, 5, 0));
        assert_ne!(draw(1, Domain::Shots, 5, 0), draw(1, Domain::Shots, 5, 1));
        assert_ne!(draw(1, Domain::Shots, 5, 0), draw(1, Domain::Shots, 6, 0));
        assert_ne!(draw(1, Domain::Shots, 5, 0), draw(2, Domain::Shots, 5, 0));
        assert_ne!(draw(1, Domain::Shots, 5, 0), draw(1, Domain::Born, 5, 0));
    }

    #[test]
    fn config_validation() {
        assert!(EmulatorConfig::default().validate().is_ok());
        let bad = EmulatorConfig {
            shots_per_step: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EmulatorConfig {
            t_step: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(EmulatorConfig::default().times().len(), 11);
    }
}
