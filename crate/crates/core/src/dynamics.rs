//! Projection of `H` onto measured subspaces, long-time propagation there, and
//! accumulation of the Loschmidt amplitude and the correlator `G_A(t)`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{DenseEigen, Engine, Propagator};
use crate::emulator::{exact_support, measure_evolved, BornSamples, EmulatorConfig, SubspaceSample};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;
use crate::fock::{build_hamiltonian, Determinant, Sector, SectorWaveFunction};
use crate::parallel;

/// Amplitudes of sampled configurations must exceed this in magnitude.
pub const MIN_SAMPLE_AMPLITUDE: f64 = 1e-14;
/// Largest merged subspace that will be propagated.
pub const MERGED_CAP: usize = 1 << 20;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Symmetric grid `t_k = k * dt_long`, `k = -n..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_max_long: f64,
    pub dt_long: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t_max_long: f64, dt_long: f64) -> Result<Self> {
        if !(dt_long > 0.0 && dt_long.is_finite()) {
            return Err(Error::Config(format!("dt-long must be positive, got {dt_long}")));
        }
        if !(t_max_long >= dt_long && t_max_long.is_finite()) {
            return Err(Error::Config(format!(
                "t-max-long must be at least dt-long, got {t_max_long}"
            )));
        }
        Ok(Self {
            t_max_long,
            dt_long,
            n: (t_max_long / dt_long).round() as usize,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of grid index `i` (index `n` is `t = 0`).
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) * self.dt_long
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Effective half-window `n * dt_long`.
    pub fn half_window(&self) -> f64 {
        self.n as f64 * self.dt_long
    }

    /// Frequency resolution `pi / T`.
    pub fn resolution(&self) -> f64 {
        std::f64::consts::PI / self.half_window()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Weights are empirical Born-sample frequencies.
    #[default]
    Stochastic,
    /// Weights are `|psi_A(x)|^2` over the whole support.
    Exhaustive,
}

/// How each `S_x` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceSource {
    /// Shot-sampled measurements of the short-time evolution.
    #[default]
    Sampled,
    /// Every state reached with probability above the support threshold.
    Exact,
    /// The whole sector.
    Full,
}

/// Configurations `x` with their weights `w_x`, ascending in sector index.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub entries: Vec<(usize, f64)>,
    /// Number of draws behind empirical weights; `None` for exact weights.
    pub n_samples: Option<usize>,
}

impl Weights {
    pub fn from_samples(s: &BornSamples) -> Self {
        Self {
            entries: (0..s.entries.len()).map(|k| (s.entries[k].0, s.weight(k))).collect(),
            n_samples: Some(s.n_samples),
        }
    }

    pub fn exhaustive(psi: &SectorWaveFunction) -> Self {
        Self {
            entries: psi
                .amps
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm() >= MIN_SAMPLE_AMPLITUDE)
                .map(|(i, a)| (i, a.norm_sqr()))
                .collect(),
            n_samples: None,
        }
    }
}

/// `S_x` for every weighted configuration, in the order of `weights`.
pub fn collect_subspaces(
    weights: &Weights,
    sector: &Sector,
    engine: &dyn Propagator,
    cfg: &EmulatorConfig,
    source: SubspaceSource,
) -> Result<Vec<SubspaceSample>> {
    let times = cfg.times();
    parallel::try_map(&weights.entries, |&(xi, _)| {
        let x = sector.dets()[xi];
        match source {
            SubspaceSource::Sampled => measure_evolved(x, sector, engine, cfg),
            SubspaceSource::Exact => exact_support(x, sector, engine, &times),
            SubspaceSource::Full => Ok(SubspaceSample::full(x, sector)),
        }
    })
}

fn local_psi(psi: &SectorWaveFunction, members: &[usize]) -> Vec<Complex64> {
    members.iter().map(|&i| psi.amps[i]).collect()
}

fn check_amplitude(x: Determinant, a: Complex64) -> Result<()> {
    if a.norm() < MIN_SAMPLE_AMPLITUDE {
        return Err(Error::DegenerateSample(x.to_string()));
    }
    Ok(())
}

/// `e^{-i H_proj t_k} |x>` restricted to `S_x`, for every grid time.
pub fn project_and_propagate(
    sample: &SubspaceSample,
    table: &IntegralTable,
    sector: &Sector,
    grid: &TimeGrid,
    dense_cap: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let xl = sample
        .members
        .iter()
        .position(|&i| sector.dets()[i] == sample.x)
        .ok_or_else(|| Error::Sector(format!("{} is not a member of its subspace", sample.x)))?;
    let h = build_hamiltonian(table, &sample.dets(sector))?;
    let engine = Engine::new(&h, dense_cap)?;
    let mut e = vec![ZERO; h.dim()];
    e[xl] = Complex64::new(1.0, 0.0);
    engine.trajectory(&e, &grid.times())
}

/// `l(x, t) = sum_{y in S_x} psi_A*(y) <y|phi_x(t)> / psi_A*(x)`.
pub fn local_estimator(x_local: usize, phi: &[Complex64], psi_local: &[Complex64]) -> Result<Complex64> {
    let ax = psi_local[x_local];
    if ax.norm() < MIN_SAMPLE_AMPLITUDE {
        return Err(Error::DegenerateSample(format!("local index {x_local}")));
    }
    let s: Complex64 = psi_local.iter().zip(phi).map(|(a, p)| a.conj() * p).sum();
    Ok(s / ax.conj())
}

/// `f(t) = sum_n c_n e^{-i w_n t}` over a symmetric grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeSeries {
    pub freqs: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

/// Steps between exact phase re-evaluations in the recurrence.
const ANCHOR_EVERY: usize = 64;

impl ModeSeries {
    /// Add `scale * f(t_k)` into `out`, which has one entry per grid point.
    pub fn accumulate(&self, grid: &TimeGrid, scale: Complex64, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), grid.len());
        let n = grid.n;
        for (&w, &c) in self.freqs.iter().zip(&self.coeffs) {
            let c = c * scale;
            if c == ZERO {
                continue;
            }
            let step = Complex64::from_polar(1.0, -w * grid.dt_long);
            let mut z = Complex64::new(1.0, 0.0);
            out[n] += c;
            for k in 1..=n {
                z = if k % ANCHOR_EVERY == 0 {
                    Complex64::from_polar(1.0, -w * (k as f64 * grid.dt_long))
                } else {
                    z * step
                };
                out[n + k] += c * z;
                out[n - k] += c * z.conj();
            }
        }
    }

    pub fn evaluate(&self, grid: &TimeGrid) -> Vec<Complex64> {
        let mut out = vec![ZERO; grid.len()];
        self.accumulate(grid, Complex64::new(1.0, 0.0), &mut out);
        out
    }
}

/// Per-configuration local estimators grouped by shared subspace.
enum GroupEstimators {
    /// Spectral form: one mode series per configuration, all sharing `freqs`.
    Spectral(Vec<(f64, ModeSeries)>),
    /// Sampled on the grid directly (Krylov path).
    Tabulated(Vec<(f64, Vec<Complex64>)>),
}

fn group_estimators(
    members: &[usize],
    xs: &[(usize, f64)],
    table: &IntegralTable,
    sector: &Sector,
    psi: &SectorWaveFunction,
    grid: &TimeGrid,
    dense_cap: usize,
) -> Result<GroupEstimators> {
    let dets: Vec<Determinant> = members.iter().map(|&i| sector.dets()[i]).collect();
    let h = build_hamiltonian(table, &dets)?;
    let a = local_psi(psi, members);
    let local = |xi: usize| members.binary_search(&xi).expect("x is a member of S_x");
    for &(xi, _) in xs {
        check_amplitude(sector.dets()[xi], psi.amps[xi])?;
    }
    if h.dim() <= dense_cap {
        let eig = DenseEigen::from_csr(&h, dense_cap)?;
        // proj_n = <psi_local|E_n>
        let proj: Vec<Complex64> = eig.coefficients(&a).iter().map(|c| c.conj()).collect();
        let out = xs
            .iter()
            .map(|&(xi, w)| {
                let xl = local(xi);
                let inv = 1.0 / a[xl].conj();
                let coeffs = proj
                    .iter()
                    .enumerate()
                    .map(|(n, p)| p * eig.vectors[(xl, n)] * inv)
                    .collect();
                (
                    w,
                    ModeSeries {
                        freqs: eig.values.clone(),
                        coeffs,
                    },
                )
            })
            .collect();
        Ok(GroupEstimators::Spectral(out))
    } else {
        let engine = Engine::new(&h, dense_cap)?;
        let forward_times: Vec<f64> = (0..=grid.n).map(|k| k as f64 * grid.dt_long).collect();
        // Negative times: <psi|U(-t)|x> = conj(<x|U(t)|psi>).
        let psi_t = engine.trajectory(&a, &forward_times)?;
        let mut out = Vec::with_capacity(xs.len());
        for &(xi, w) in xs {
            let xl = local(xi);
            let inv = 1.0 / a[xl].conj();
            let mut e = vec![ZERO; h.dim()];
            e[xl] = Complex64::new(1.0, 0.0);
            let phi_t = engine.trajectory(&e, &forward_times)?;
            let mut series = vec![ZERO; grid.len()];
            for k in 0..=grid.n {
                let fwd: Complex64 = a.iter().zip(&phi_t[k]).map(|(p, f)| p.conj() * f).sum();
                series[grid.n + k] = fwd * inv;
                series[grid.n - k] = psi_t[k][xl].conj() * inv;
            }
            out.push((w, series));
        }
        Ok(GroupEstimators::Tabulated(out))
    }
}

/// Weighted sums `sum_x w_x l(x,t)` and `sum_x w_x |l(x,t)|^2` over the grid.
#[derive(Debug, Clone)]
struct Moments {
    first: Vec<Complex64>,
    second: Vec<f64>,
}

impl Moments {
    fn zeros(len: usize) -> Self {
        Self {
            first: vec![ZERO; len],
            second: vec![0.0; len],
        }
    }

    fn add_series(&mut self, w: f64, series: &[Complex64]) {
        for ((f, s), l) in self.first.iter_mut().zip(&mut self.second).zip(series) {
            *f += w * l;
            *s += w * l.norm_sqr();
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
    }
}

/// Configurations reduced per worker task; fixed so that sums do not depend on the backend.
const REDUCE_CHUNK: usize = 8;

/// Loschmidt amplitude, correlator and their context on a symmetric time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSeries {
    pub grid: TimeGrid,
    pub loschmidt: Vec<Complex64>,
    pub g_a: Vec<Complex64>,
    /// Standard error of the Monte-Carlo mean per grid point (stochastic mode only).
    pub stderr: Option<Vec<f64>>,
    pub e0: f64,
    pub a_norm2: f64,
    pub mode: Mode,
}

impl CorrelatorSeries {
    pub fn from_loschmidt(grid: TimeGrid, loschmidt: Vec<Complex64>, mode: Mode) -> Self {
        Self {
            grid,
            loschmidt,
            g_a: Vec::new(),
            stderr: None,
            e0: 0.0,
            a_norm2: 1.0,
            mode,
        }
    }

    /// `L_A(0)`.
    pub fn loschmidt_at_zero(&self) -> Complex64 {
        self.loschmidt[self.grid.n]
    }

    /// `max_k |G_A(-t_k) - conj(G_A(t_k))|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.n;
        (0..=n)
            .map(|k| (self.g_a[n - k] - self.g_a[n + k].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Accumulate `L_A(t) = sum_x w_x l(x, t)` from precomputed estimator series keyed by
/// sector index; every weighted configuration needs an estimator.
pub fn accumulate_loschmidt(
    grid: &TimeGrid,
    weights: &Weights,
    estimators: &BTreeMap<usize, Vec<Complex64>>,
    mode: Mode,
) -> Result<CorrelatorSeries> {
    let mut m = Moments::zeros(grid.len());
    for &(xi, w) in &weights.entries {
        let s = estimators
            .get(&xi)
            .ok_or_else(|| Error::MissingEstimator(format!("sector index {xi}")))?;
        m.add_series(w, s);
    }
    Ok(finish(grid, m, weights, mode))
}

fn finish(grid: &TimeGrid, m: Moments, weights: &Weights, mode: Mode) -> CorrelatorSeries {
    let stderr = match (mode, weights.n_samples) {
        (Mode::Stochastic, Some(ns)) => Some(
            m.first
                .iter()
                .zip(&m.second)
                .map(|(l, s)| ((s - l.norm_sqr()).max(0.0) / ns as f64).sqrt())
                .collect(),
        ),
        _ => None,
    };
    CorrelatorSeries {
        stderr,
        ..CorrelatorSeries::from_loschmidt(*grid, m.first, mode)
    }
}

/// Per-x projection, propagation and accumulation in one pass.
///
/// Configurations sharing an identical `S_x` share one diagonalization. In exhaustive
/// mode each group collapses to a single mode series before evaluation.
pub fn projected_loschmidt(
    table: &IntegralTable,
    psi: &SectorWaveFunction,
    weights: &Weights,
    subspaces: &[SubspaceSample],
    grid: &TimeGrid,
    mode: Mode,
    dense_cap: usize,
) -> Result<CorrelatorSeries> {
    let sector = &*psi.sector;
    let mut groups: BTreeMap<&[usize], Group> = BTreeMap::new();
    for (&(xi, w), s) in weights.entries.iter().zip(subspaces) {
        groups.entry(&s.members).or_default().push((xi, w));
    }
    let groups: Vec<(&[usize], Group)> = groups.into_iter().collect();
    let estimators = parallel::try_map(&groups, |(members, xs)| {
        group_estimators(members, xs, table, sector, psi, grid, dense_cap)
    })?;

    let collapse = mode == Mode::Exhaustive;
    // Flatten to work items in deterministic (group, x) order.
    let mut items: Vec<Item<'_>> = Vec::new();
    for g in &estimators {
        match g {
            GroupEstimators::Spectral(v) if collapse => {
                let mut merged = ModeSeries {
                    freqs: v[0].1.freqs.clone(),
                    coeffs: vec![ZERO; v[0].1.freqs.len()],
                };
                for (w, s) in v {
                    merged.coeffs.iter_mut().zip(&s.coeffs).for_each(|(a, b)| *a += w * b);
                }
                items.push(Item::Collapsed(merged));
            }
            GroupEstimators::Spectral(v) => items.extend(v.iter().map(|(w, s)| Item::Modes(*w, s))),
            GroupEstimators::Tabulated(v) => items.extend(v.iter().map(|(w, s)| Item::Table(*w, s))),
        }
    }
    let chunks: Vec<&[Item<'_>]> = items.chunks(REDUCE_CHUNK).collect();
    let partials = parallel::map(&chunks, |chunk| {
        let mut m = Moments::zeros(grid.len());
        let mut buf = vec![ZERO; grid.len()];
        for item in chunk.iter() {
            match item {
                Item::Collapsed(s) => s.accumulate(grid, Complex64::new(1.0, 0.0), &mut m.first),
                Item::Modes(w, s) => {
                    buf.iter_mut().for_each(|b| *b = ZERO);
                    s.accumulate(grid, Complex64::new(1.0, 0.0), &mut buf);
                    m.add_series(*w, &buf);
                }
                Item::Table(w, s) => m.add_series(*w, s),
            }
        }
        m
    });
    let mut total = Moments::zeros(grid.len());
    for p in &partials {
        total.merge(p);
    }
    Ok(finish(grid, total, weights, mode))
}

/// `(sector index, weight)` of the configurations sharing one subspace.
type Group = Vec<(usize, f64)>;

enum Item<'a> {
    Collapsed(ModeSeries),
    Modes(f64, &'a ModeSeries),
    Table(f64, &'a Vec<Complex64>),
}

/// Single propagation in the union `U = ∪_x S_x`:
/// `L_A(t) = <psi_A^U| e^{-i H_U t} |chi>` with `chi = sum_x w_x / psi_A*(x) |x>`.
pub fn merged_loschmidt(
    table: &IntegralTable,
    psi: &SectorWaveFunction,
    weights: &Weights,
    subspaces: &[SubspaceSample],
    grid: &TimeGrid,
    mode: Mode,
    dense_cap: usize,
) -> Result<(CorrelatorSeries, usize)> {
    let sector = &*psi.sector;
    let union: BTreeSet<usize> = subspaces.iter().flat_map(|s| s.members.iter().copied()).collect();
    if union.len() > MERGED_CAP {
        return Err(Error::SizeCap {
            what: "merged subspace",
            dim: union.len(),
            cap: MERGED_CAP,
        });
    }
    let members: Vec<usize> = union.into_iter().collect();
    let dim = members.len();
    let dets: Vec<Determinant> = members.iter().map(|&i| sector.dets()[i]).collect();
    let h = build_hamiltonian(table, &dets)?;
    let a = local_psi(psi, &members);
    let mut chi = vec![ZERO; dim];
    for &(xi, w) in &weights.entries {
        let ax = psi.amps[xi];
        check_amplitude(sector.dets()[xi], ax)?;
        let xl = members.binary_search(&xi).expect("x is in the union");
        chi[xl] += w / ax.conj();
    }
    let mut out = vec![ZERO; grid.len()];
    if dim <= dense_cap {
        let eig = DenseEigen::from_csr(&h, dense_cap)?;
        let pa = eig.coefficients(&a);
        let pc = eig.coefficients(&chi);
        let series = ModeSeries {
            freqs: eig.values.clone(),
            coeffs: pa.iter().zip(&pc).map(|(p, c)| p.conj() * c).collect(),
        };
        series.accumulate(grid, Complex64::new(1.0, 0.0), &mut out);
    } else {
        let engine = Engine::new(&h, dense_cap)?;
        let forward: Vec<f64> = (0..=grid.n).map(|k| k as f64 * grid.dt_long).collect();
        let chi_t = engine.trajectory(&chi, &forward)?;
        let psi_t = engine.trajectory(&a, &forward)?;
        let dot = |u: &[Complex64], v: &[Complex64]| -> Complex64 {
            u.iter().zip(v).map(|(p, q)| p.conj() * q).sum()
        };
        for k in 0..=grid.n {
            out[grid.n + k] = dot(&a, &chi_t[k]);
            out[grid.n - k] = dot(&chi, &psi_t[k]).conj();
        }
    }
    Ok((CorrelatorSeries::from_loschmidt(*grid, out, mode), dim))
}

/// `G_A(t) = e^{i E_0 t} <A†A> L_A(t)` pointwise.
pub fn assemble_correlator(mut series: CorrelatorSeries, e0: f64, a_norm2: f64) -> CorrelatorSeries {
    let grid = series.grid;
    series.g_a = series
        .loschmidt
        .iter()
        .enumerate()
        .map(|(i, l)| Complex64::from_polar(a_norm2, e0 * grid.time(i)) * l)
        .collect();
    series.e0 = e0;
    series.a_norm2 = a_norm2;
    series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = TimeGrid::new(1000.0, 0.1).unwrap();
        assert_eq!(g.n, 10000);
        assert_eq!(g.len(), 20001);
        assert_eq!(g.time(g.n), 0.0);
        assert_eq!(g.time(0), -g.time(g.len() - 1));
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(0.01, 0.1).is_err());
    }

    #[test]
    fn mode_series_matches_direct_sum() {
        let grid = TimeGrid::new(50.0, 0.1).unwrap();
        let s = ModeSeries {
            freqs: vec![-458.3, 0.7, 12.25],
            coeffs: vec![Complex64::new(0.3, -0.1), Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.4)],
        };
        let out = s.evaluate(&grid);
        for (i, v) in out.iter().enumerate() {
            let t = grid.time(i);
            let direct: Complex64 = s
                .freqs
                .iter()
                .zip(&s.coeffs)
                .map(|(w, c)| c * Complex64::from_polar(1.0, -w * t))
                .sum();
            assert!((v - direct).norm() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn assemble_at_zero_is_norm() {
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let s = CorrelatorSeries::from_loschmidt(grid, vec![Complex64::new(1.0, 0.0); 5], Mode::Exhaustive);
        let g = assemble_correlator(s, -3.0, 0.7);
        assert_eq!(g.g_a[grid.n], Complex64::new(0.7, 0.0));
    }

    #[test]
    fn missing_estimator() {
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let w = Weights {
            entries: vec![(3, 1.0)],
            n_samples: None,
        };
        assert!(matches!(
            accumulate_loschmidt(&grid, &w, &BTreeMap::new(), Mode::Exhaustive),
            Err(Error::MissingEstimator(_))
        ));
    }
}
