use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subspec::config::{ReferenceKind, RunConfig};
use subspec::dynamics::{Mode, SubspaceSource};
use subspec::fcidump::read_fcidump;
use subspec::fock::enumerate_sector;
use subspec::pipeline::{run_pipeline, run_reference_spectrum, run_scaling_sweep, run_variance_study};
use subspec::{Error, Result};

#[derive(Parser)]
#[command(name = "subspec", version, about = "Spectral functions from sampled subspace dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write spectrum, peaks, correlator and manifest.
    Run(RunArgs),
    /// Repeat the run over shot counts and compare peaks with the exact spectrum.
    ScalingSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ascending shot counts.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512,1024,2048,4096,8192,16384")]
        shot_list: Vec<usize>,
    },
    /// Exact and empirical estimator variances at a list of times.
    VarianceStudy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9,10")]
        times: Vec<f64>,
        /// Independent estimator draws per time for the empirical variance.
        #[arg(long, default_value_t = 10000)]
        draws: usize,
    },
    /// Parse an integral file and report its header, checksum and sector size.
    ValidateFcidump { path: PathBuf },
    /// Exact excitation energies and weights of the perturbed state.
    ReferenceSpectrum(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Stochastic,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubspaceArg {
    Sampled,
    Exact,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    None,
    Dense,
}

/// Every flag overrides the matching key of the config file.
#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fcidump: Option<PathBuf>,
    /// Excitation operator, e.g. "+9.u -7.u".
    #[arg(long, allow_hyphen_values = true)]
    excitation: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    reference: Option<ReferenceArg>,
    #[arg(long)]
    dense_cap: Option<usize>,
    #[arg(long)]
    t_step: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    t_max_long: Option<f64>,
    #[arg(long)]
    dt_long: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    merge_subspaces: Option<bool>,
    #[arg(long, value_enum)]
    subspace: Option<SubspaceArg>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    match_tol: Option<f64>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.fcidump, &self.excitation) {
            (Some(path), _, _) => RunConfig::from_file(path)?,
            (None, Some(f), Some(e)) => RunConfig::new(f.clone(), e.clone()),
            _ => {
                return Err(Error::Config(
                    "either --config or both --fcidump and --excitation are required".into(),
                ))
            }
        };
        if let Some(v) = self.fcidump {
            cfg.fcidump = v;
        }
        if let Some(v) = self.excitation {
            cfg.excitation = v;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.reference {
            cfg.reference = match v {
                ReferenceArg::None => ReferenceKind::None,
                ReferenceArg::Dense => ReferenceKind::Dense,
            };
        }
        if let Some(v) = self.dense_cap {
            cfg.dense_cap = v;
        }
        let e = &mut cfg.emulator;
        if let Some(v) = self.t_step {
            e.t_step = v;
        }
        if let Some(v) = self.n_steps {
            e.n_steps = v;
        }
        if let Some(v) = self.shots {
            e.shots_per_step = v;
        }
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.n_samples {
            e.n_samples = v;
        }
        let d = &mut cfg.dynamics;
        if let Some(v) = self.t_max_long {
            d.t_max_long = v;
        }
        if let Some(v) = self.dt_long {
            d.dt_long = v;
        }
        if let Some(v) = self.mode {
            d.mode = match v {
                ModeArg::Stochastic => Mode::Stochastic,
                ModeArg::Exhaustive => Mode::Exhaustive,
            };
        }
        if let Some(v) = self.merge_subspaces {
            d.merge_subspaces = v;
        }
        if let Some(v) = self.subspace {
            d.subspace = match v {
                SubspaceArg::Sampled => SubspaceSource::Sampled,
                SubspaceArg::Exact => SubspaceSource::Exact,
                SubspaceArg::Full => SubspaceSource::Full,
            };
        }
        if let Some(v) = self.threshold {
            cfg.spectrum.threshold = v;
        }
        if let Some(v) = self.match_tol {
            cfg.spectrum.match_tol = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let (manifest, outcome) = run_pipeline(&cfg)?;
            let sys = manifest.system.as_ref().expect("filled on success");
            println!("E0 = {:.10} Ha, <A†A> = {:.6}", sys.e0, sys.a_norm2);
            println!(
                "{} configurations, max dim S_x = {}",
                outcome.subspaces.len(),
                outcome.max_subspace_dim()
            );
            for p in &outcome.spectrum.peaks {
                println!("peak {:.6} Ha  height {:.4e}", p.omega, p.height);
            }
            if let Some(r) = &manifest.reference {
                println!(
                    "reference: {} matched, {} missed, {} spurious, max error {:.2e} Ha",
                    r.matched, r.missed, r.spurious, r.max_error
                );
            }
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::ScalingSweep { run, shot_list } => {
            let cfg = run.resolve()?;
            println!("shots\tmax_dim\tmatched\tmissed\tspurious\tmax_error");
            for r in run_scaling_sweep(&cfg, &shot_list)? {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{:.3e}",
                    r.shots, r.max_dim, r.matched, r.missed, r.spurious, r.max_error
                );
            }
        }
        Command::VarianceStudy { run, times, draws } => {
            let cfg = run.resolve()?;
            println!("estimator\tt\tempirical\tpredicted\texact");
            for r in run_variance_study(&cfg, &times, draws)? {
                println!(
                    "{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                    r.estimator, r.t, r.empirical, r.predicted, r.exact
                );
            }
        }
        Command::ValidateFcidump { path } => {
            let t = read_fcidump(&path)?;
            let (nu, nd) = t.spin_counts();
            let sector = enumerate_sector(t.norb, nu, nd)?;
            println!("norb = {}, nelec = {}, ms2 = {}", t.norb, t.nelec, t.ms2);
            println!("sector ({nu}, {nd}) with {} determinants", sector.len());
            println!("checksum {}", t.checksum());
        }
        Command::ReferenceSpectrum(args) => {
            let cfg = args.resolve()?;
            let lines = run_reference_spectrum(&cfg)?;
            let threshold = cfg.spectrum.threshold;
            for l in lines.iter().filter(|l| l.weight > threshold) {
                println!("{:.6}\t{:.6e}", l.omega, l.weight);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
