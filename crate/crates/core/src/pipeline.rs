//! End-to-end runs: integrals to spectrum, shot-count sweeps, variance studies and
//! reference spectra, with all artifacts written to the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::config::{ReferenceKind, RunConfig};
use crate::diagnostics::{alt_estimator_variance, sampling_strategy_variance, ENUMERATION_CAP};
use crate::dynamics::{
    assemble_correlator, collect_subspaces, merged_loschmidt, projected_loschmidt, CorrelatorSeries, Mode, Weights,
};
use crate::eigen::{ground_state, DenseEigen, Engine, SpectrumReference, FULL_SPECTRUM_CAP};
use crate::emulator::{born_sample, EmulatorConfig, SubspaceSample, SUPPORT_EPS};
use crate::error::{Error, Result};
use crate::fcidump::{read_fcidump, IntegralTable};
use crate::fock::{build_hamiltonian, enumerate_sector, CsrMatrix, ExcitationOperator, Sector, SectorWaveFunction};
use crate::parallel;
use crate::spectrum::{
    compare_to_reference, extract_peaks, fourier_spectrum, reference_lines, MatchReport, ReferenceLine,
    SpectrumResult,
};

/// Wall-clock seconds per completed stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub backend: &'static str,
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn new() -> Self {
        Self {
            backend: parallel::backend(),
            stages: Vec::new(),
        }
    }

    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(name))?;
        self.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Everything that does not depend on the emulator settings.
pub struct Prepared {
    pub table: IntegralTable,
    pub checksum: String,
    pub sector: Arc<Sector>,
    pub e0: f64,
    pub psi0: SectorWaveFunction,
    pub operator: ExcitationOperator,
    pub psi_a: SectorWaveFunction,
    pub a_norm2: f64,
    /// `H` in the sector of `psi_A`.
    pub h_target: CsrMatrix,
    /// Dense decomposition of `h_target` when within the dense cap or a reference is requested.
    pub dense: Option<DenseEigen>,
    pub reference: Option<SpectrumReference>,
}

impl Prepared {
    pub fn engine(&self, dense_cap: usize) -> Result<Engine<'_>> {
        match &self.dense {
            Some(eig) if eig.dim() <= dense_cap => Ok(Engine::from_dense(eig)),
            _ => Engine::new(&self.h_target, dense_cap),
        }
    }

    pub fn target_sector(&self) -> &Sector {
        &self.psi_a.sector
    }
}

/// Parse, diagonalize and perturb.
pub fn prepare(cfg: &RunConfig, timings: &mut Timings) -> Result<Prepared> {
    let table = timings.stage("parse", || read_fcidump(&cfg.fcidump))?;
    let checksum = table.checksum();
    let operator = timings.stage("config", || {
        cfg.validate()?;
        cfg.operator()
    })?;
    let (sector, h) = timings.stage("sector", || {
        let (nu, nd) = table.spin_counts();
        let sector = Arc::new(enumerate_sector(table.norb, nu, nd)?);
        let h = build_hamiltonian(&table, sector.dets())?;
        Ok((sector, h))
    })?;
    let (e0, psi0) = timings.stage("ground_state", || ground_state(&h, Arc::clone(&sector)))?;
    let (psi_a, a_norm2) = timings.stage("excitation", || operator.apply(&psi0))?;
    let h_target = timings.stage("target_hamiltonian", || {
        if Arc::ptr_eq(&psi_a.sector, &sector) {
            Ok(h)
        } else {
            build_hamiltonian(&table, psi_a.sector.dets())
        }
    })?;
    let want_dense = h_target.dim() <= cfg.dense_cap || cfg.reference == ReferenceKind::Dense;
    let dense = timings.stage("diagonalize", || {
        if want_dense {
            let cap = if cfg.reference == ReferenceKind::Dense {
                FULL_SPECTRUM_CAP
            } else {
                cfg.dense_cap
            };
            DenseEigen::from_csr(&h_target, cap).map(Some)
        } else {
            Ok(None)
        }
    })?;
    let reference = match (&dense, cfg.reference) {
        (Some(eig), ReferenceKind::Dense) => Some(SpectrumReference::from_eigen(eig, &psi_a.amps, e0)),
        _ => None,
    };
    Ok(Prepared {
        table,
        checksum,
        sector,
        e0,
        psi0,
        operator,
        psi_a,
        a_norm2,
        h_target,
        dense,
        reference,
    })
}

/// Per-configuration row of the subspace table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceRow {
    pub x: String,
    pub index: usize,
    pub weight: f64,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub weights: Weights,
    pub subspaces: Vec<SubspaceSample>,
    pub merged_dim: Option<usize>,
    pub series: CorrelatorSeries,
    pub spectrum: SpectrumResult,
    pub lines: Option<Vec<ReferenceLine>>,
    pub report: Option<MatchReport>,
    pub engine: &'static str,
}

impl Outcome {
    pub fn max_subspace_dim(&self) -> usize {
        self.subspaces.iter().map(|s| s.dim()).max().unwrap_or(0)
    }

    pub fn mean_subspace_dim(&self) -> f64 {
        if self.subspaces.is_empty() {
            return 0.0;
        }
        self.subspaces.iter().map(|s| s.dim() as f64).sum::<f64>() / self.subspaces.len() as f64
    }
}

/// Sampling, measurement, projected dynamics and spectrum for one emulator setting.
pub fn execute(
    prep: &Prepared,
    cfg: &RunConfig,
    emulator: &EmulatorConfig,
    timings: &mut Timings,
) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let engine = timings.stage("engine", || prep.engine(cfg.dense_cap))?;
    let weights = timings.stage("sampling", || {
        Ok(match cfg.dynamics.mode {
            Mode::Stochastic => Weights::from_samples(&born_sample(&prep.psi_a, emulator.n_samples, emulator.seed)),
            Mode::Exhaustive => Weights::exhaustive(&prep.psi_a),
        })
    })?;
    let subspaces = timings.stage("measurement", || {
        collect_subspaces(&weights, prep.target_sector(), &engine, emulator, cfg.dynamics.subspace)
    })?;
    let (series, merged_dim) = timings.stage("dynamics", || {
        if cfg.dynamics.merge_subspaces {
            let (s, d) = merged_loschmidt(
                &prep.table,
                &prep.psi_a,
                &weights,
                &subspaces,
                &grid,
                cfg.dynamics.mode,
                cfg.dense_cap,
            )?;
            Ok((s, Some(d)))
        } else {
            let s = projected_loschmidt(
                &prep.table,
                &prep.psi_a,
                &weights,
                &subspaces,
                &grid,
                cfg.dynamics.mode,
                cfg.dense_cap,
            )?;
            Ok((s, None))
        }
    })?;
    let series = timings.stage("correlator", || Ok(assemble_correlator(series, prep.e0, prep.a_norm2)))?;
    let spectrum = timings.stage("spectrum", || {
        Ok(extract_peaks(fourier_spectrum(&series)?, cfg.spectrum.threshold))
    })?;
    let (lines, report) = timings.stage("compare", || {
        Ok(match &prep.reference {
            Some(r) => {
                let lines = reference_lines(r, prep.a_norm2, grid.resolution());
                let report = compare_to_reference(&spectrum, &lines, cfg.match_tol(&grid));
                (Some(lines), Some(report))
            }
            None => (None, None),
        })
    })?;
    Ok(Outcome {
        weights,
        subspaces,
        merged_dim,
        series,
        spectrum,
        lines,
        report,
        engine: engine.name(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemInfo {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub sector: (usize, usize),
    pub sector_dim: usize,
    pub target_sector: (usize, usize),
    pub target_dim: usize,
    pub e0: f64,
    pub operator: String,
    pub a_norm2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceSummary {
    pub unique_configurations: usize,
    pub max_dim: usize,
    pub mean_dim: f64,
    pub merged_dim: Option<usize>,
    pub table: Vec<SubspaceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsSummary {
    pub grid_points: usize,
    pub half_window: f64,
    pub resolution: f64,
    pub engine: &'static str,
    pub loschmidt_at_zero: (f64, f64),
    pub max_abs_loschmidt: f64,
    pub hermiticity_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub n_peaks: usize,
    pub threshold: f64,
    pub parseval_ratio: f64,
    pub imag_ratio: f64,
    pub normalization: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSummary {
    pub significant_lines: usize,
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
    pub straddling: usize,
    pub max_error: f64,
    pub match_tol: f64,
}

/// Provenance and summary of a run. Wall-clock data lives in `timings.json` so that
/// this file is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub status: &'static str,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub fcidump_checksum: Option<String>,
    pub seed: u64,
    pub system: Option<SystemInfo>,
    pub subspaces: Option<SubspaceSummary>,
    pub dynamics: Option<DynamicsSummary>,
    pub spectrum: Option<SpectrumSummary>,
    pub reference: Option<ReferenceSummary>,
    pub outputs: Vec<String>,
}

const NORMALIZATION: &str =
    "G(w_m) = (dt/2T) sum_k exp(i w_m t_k) G_A(t_k), rectangular window, w_m = m pi/T; heights are convention dependent";

fn config_echo(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(m) = v.as_object_mut() {
        m.remove("output-dir");
    }
    v
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            status: "ok",
            failed_stage: None,
            error: None,
            config: config_echo(cfg),
            fcidump_checksum: None,
            seed: cfg.emulator.seed,
            system: None,
            subspaces: None,
            dynamics: None,
            spectrum: None,
            reference: None,
            outputs: Vec::new(),
        }
    }

    fn fill_system(&mut self, p: &Prepared) {
        let t = p.target_sector();
        self.fcidump_checksum = Some(p.checksum.clone());
        self.system = Some(SystemInfo {
            norb: p.table.norb,
            nelec: p.table.nelec,
            ms2: p.table.ms2,
            sector: (p.sector.n_up, p.sector.n_down),
            sector_dim: p.sector.len(),
            target_sector: (t.n_up, t.n_down),
            target_dim: t.len(),
            e0: p.e0,
            operator: p.operator.to_string(),
            a_norm2: p.a_norm2,
        });
    }

    fn fill_outcome(&mut self, p: &Prepared, o: &Outcome) {
        let sector = p.target_sector();
        self.subspaces = Some(SubspaceSummary {
            unique_configurations: o.subspaces.len(),
            max_dim: o.max_subspace_dim(),
            mean_dim: o.mean_subspace_dim(),
            merged_dim: o.merged_dim,
            table: o
                .weights
                .entries
                .iter()
                .zip(&o.subspaces)
                .map(|(&(i, w), s)| SubspaceRow {
                    x: sector.dets()[i].to_bitstring(sector.n_spin_orbitals()),
                    index: i,
                    weight: w,
                    dim: s.dim(),
                })
                .collect(),
        });
        let g = o.series.grid;
        let l0 = o.series.loschmidt_at_zero();
        self.dynamics = Some(DynamicsSummary {
            grid_points: g.len(),
            half_window: g.half_window(),
            resolution: g.resolution(),
            engine: o.engine,
            loschmidt_at_zero: (l0.re, l0.im),
            max_abs_loschmidt: o.series.loschmidt.iter().map(|l| l.norm()).fold(0.0, f64::max),
            hermiticity_defect: o.series.hermiticity_defect(),
        });
        self.spectrum = Some(SpectrumSummary {
            n_peaks: o.spectrum.peaks.len(),
            threshold: o.spectrum.threshold,
            parseval_ratio: o.spectrum.parseval_ratio,
            imag_ratio: o.spectrum.imag_ratio,
            normalization: NORMALIZATION,
        });
        if let (Some(r), Some(lines)) = (&o.report, &o.lines) {
            self.reference = Some(ReferenceSummary {
                significant_lines: lines.iter().filter(|l| l.weight > r.threshold).count(),
                matched: r.matched.len(),
                missed: r.missed.len(),
                spurious: r.spurious.len(),
                straddling: r.straddling.len(),
                max_error: r.max_error(),
                match_tol: r.match_tol,
            });
        }
    }
}

fn provenance_header(checksum: &str, cfg: &RunConfig) -> String {
    format!(
        "# fcidump-checksum: {checksum}\n# config: {}\n",
        serde_json::to_string(&config_echo(cfg)).expect("config serializes")
    )
}

fn write_csv<R: Serialize>(path: &Path, header: &str, cols: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(cols)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Serialize)]
struct PeakRecord {
    omega: f64,
    height: f64,
    interp_refined: bool,
    matched_reference: Option<f64>,
    reference_weight: Option<f64>,
    abs_error: Option<f64>,
}

#[derive(Serialize)]
struct PeaksFile<'a> {
    fcidump_checksum: &'a str,
    config: serde_json::Value,
    resolution: f64,
    threshold: f64,
    normalization: &'static str,
    peaks: Vec<PeakRecord>,
    report: Option<&'a MatchReport>,
}

fn write_series(dir: &Path, header: &str, s: &CorrelatorSeries) -> Result<()> {
    let g = s.grid;
    write_csv(
        &dir.join("gat.csv"),
        header,
        &["t", "re_g", "im_g"],
        s.g_a.iter().enumerate().map(|(i, v)| (g.time(i), v.re, v.im)),
    )
}

fn write_spectrum(dir: &Path, header: &str, checksum: &str, cfg: &RunConfig, o: &Outcome) -> Result<()> {
    write_csv(
        &dir.join("spectrum.csv"),
        header,
        &["omega", "magnitude"],
        o.spectrum.omega.iter().zip(&o.spectrum.magnitude).map(|(w, m)| (*w, *m)),
    )?;
    let peaks = o
        .spectrum
        .peaks
        .iter()
        .map(|p| {
            let m = o
                .report
                .as_ref()
                .and_then(|r| r.matched.iter().find(|m| m.peak == *p));
            PeakRecord {
                omega: p.omega,
                height: p.height,
                interp_refined: p.interp_refined,
                matched_reference: m.map(|m| m.reference.omega),
                reference_weight: m.map(|m| m.reference.weight),
                abs_error: m.map(|m| m.abs_error),
            }
        })
        .collect();
    write_json(
        &dir.join("peaks.json"),
        &PeaksFile {
            fcidump_checksum: checksum,
            config: config_echo(cfg),
            resolution: o.spectrum.resolution,
            threshold: o.spectrum.threshold,
            normalization: NORMALIZATION,
            peaks,
            report: o.report.as_ref(),
        },
    )
}

/// Full run with artifacts. On failure the manifest records the failed stage and any
/// artifacts completed before it are left in place.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(RunManifest, Outcome)> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::new(cfg);
    let mut timings = Timings::new();
    let result = run_inner(cfg, &dir, &mut manifest, &mut timings);
    if let Err(e) = &result {
        manifest.status = "failed";
        if let Error::Stage { stage, source } = e {
            manifest.failed_stage = Some(stage.to_string());
            manifest.error = Some(source.to_string());
        } else {
            manifest.error = Some(e.to_string());
        }
    }
    manifest.outputs.push("manifest.json".into());
    manifest.outputs.push("timings.json".into());
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("timings.json"), &timings)?;
    result.map(|o| (manifest, o))
}

fn run_inner(cfg: &RunConfig, dir: &Path, manifest: &mut RunManifest, timings: &mut Timings) -> Result<Outcome> {
    let prep = prepare(cfg, timings)?;
    manifest.fill_system(&prep);
    let header = provenance_header(&prep.checksum, cfg);
    let outcome = execute(&prep, cfg, &cfg.emulator, timings)?;
    manifest.fill_outcome(&prep, &outcome);
    timings.stage("output", || {
        write_series(dir, &header, &outcome.series)?;
        manifest.outputs.push("gat.csv".into());
        write_spectrum(dir, &header, &prep.checksum, cfg, &outcome)?;
        manifest.outputs.push("spectrum.csv".into());
        manifest.outputs.push("peaks.json".into());
        Ok(())
    })?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub shots: usize,
    pub max_dim: usize,
    pub mean_dim: f64,
    pub n_peaks: usize,
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub resolution: f64,
}

/// Repeat the run for each shot count against a dense reference. Born samples and
/// shot streams are shared across rows, so larger shot counts extend smaller ones.
pub fn run_scaling_sweep(cfg: &RunConfig, shot_list: &[usize]) -> Result<Vec<SweepRow>> {
    if shot_list.windows(2).any(|w| w[0] >= w[1]) || shot_list.is_empty() {
        return Err(Error::Config("shot list must be non-empty and strictly ascending".into()));
    }
    let mut cfg = cfg.clone();
    cfg.reference = ReferenceKind::Dense;
    let mut timings = Timings::new();
    let prep = prepare(&cfg, &mut timings)?;
    let grid = cfg.grid()?;
    let mut rows = Vec::with_capacity(shot_list.len());
    for &shots in shot_list {
        let emu = EmulatorConfig {
            shots_per_step: shots,
            ..cfg.emulator
        };
        let o = execute(&prep, &cfg, &emu, &mut timings)?;
        let r = o.report.as_ref().expect("dense reference requested");
        let mean_error = if r.matched.is_empty() {
            f64::NAN
        } else {
            r.matched.iter().map(|m| m.abs_error).sum::<f64>() / r.matched.len() as f64
        };
        rows.push(SweepRow {
            shots,
            max_dim: o.max_subspace_dim(),
            mean_dim: o.mean_subspace_dim(),
            n_peaks: o.spectrum.peaks.len(),
            matched: r.matched.len(),
            missed: r.missed.len(),
            spurious: r.spurious.len(),
            max_error: r.max_error(),
            mean_error,
            resolution: grid.resolution(),
        });
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let header = provenance_header(&prep.checksum, &cfg);
    write_csv(
        &cfg.output_dir.join("sweep.csv"),
        &header,
        &[
            "shots", "max_dim", "mean_dim", "n_peaks", "matched", "missed", "spurious", "max_error", "mean_error",
            "resolution",
        ],
        rows.iter(),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub estimator: &'static str,
    pub t: f64,
    pub empirical: f64,
    pub predicted: f64,
    pub exact: f64,
    pub bound: f64,
}

/// Both estimators' variances at each time on the perturbed state of `cfg`.
pub fn run_variance_study(cfg: &RunConfig, times: &[f64], n_draws: usize) -> Result<Vec<VarianceRow>> {
    let mut cfg = cfg.clone();
    cfg.reference = ReferenceKind::None;
    cfg.dense_cap = cfg.dense_cap.max(ENUMERATION_CAP);
    let mut timings = Timings::new();
    let prep = prepare(&cfg, &mut timings)?;
    let dim = prep.h_target.dim();
    let eig = prep.dense.as_ref().ok_or(Error::SizeCap {
        what: "exact enumeration",
        dim,
        cap: ENUMERATION_CAP,
    })?;
    let psi = &prep.psi_a.amps;
    let mut rows = Vec::new();
    for &t in times {
        let s = sampling_strategy_variance(psi, eig, t, n_draws, cfg.emulator.seed)?;
        rows.push(VarianceRow {
            estimator: "sampling",
            t,
            empirical: s.empirical_var,
            predicted: s.predicted_var,
            exact: s.exact_var,
            bound: 1.0,
        });
        let a = alt_estimator_variance(psi, eig, t, n_draws, cfg.emulator.seed, SUPPORT_EPS)?;
        let l2 = a.l_a_exact.0.powi(2) + a.l_a_exact.1.powi(2);
        rows.push(VarianceRow {
            estimator: "alternative",
            t,
            empirical: a.empirical_var,
            predicted: a.predicted_var,
            exact: a.exact_var,
            bound: dim as f64 - l2,
        });
    }
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(
        &cfg.output_dir.join("variance.csv"),
        &provenance_header(&prep.checksum, &cfg),
        &["estimator", "t", "empirical", "predicted", "exact", "bound"],
        rows.iter(),
    )?;
    Ok(rows)
}

/// Exact lines `(E_n - E_0, weight)` of the perturbed state, written to `reference.csv`.
pub fn run_reference_spectrum(cfg: &RunConfig) -> Result<Vec<ReferenceLine>> {
    let mut cfg = cfg.clone();
    cfg.reference = ReferenceKind::Dense;
    let mut timings = Timings::new();
    let prep = prepare(&cfg, &mut timings)?;
    let r = prep.reference.as_ref().expect("dense reference requested");
    let lines: Vec<ReferenceLine> = r
        .lines(prep.a_norm2, 1e-9)
        .into_iter()
        .map(|(omega, weight)| ReferenceLine { omega, weight })
        .collect();
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(
        &cfg.output_dir.join("reference.csv"),
        &provenance_header(&prep.checksum, &cfg),
        &["omega", "weight"],
        lines.iter().map(|l| (l.omega, l.weight)),
    )?;
    Ok(lines)
}

/// Paths of the standard run artifacts inside `dir`.
pub fn artifact_paths(dir: &Path) -> Vec<PathBuf> {
    ["gat.csv", "spectrum.csv", "peaks.json", "manifest.json"]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}
