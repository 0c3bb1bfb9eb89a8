use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use birthmark::harness::{
    run_with_workers, verification_suite, ConfigOverrides, Experiment, Report,
};
use birthmark::{Result, SamplingPath, SymmetryClass};

/// Monte Carlo checks of return-probability enhancement in GOE/GUE systems.
#[derive(Parser)]
#[command(name = "birthmark", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-overlap vs cross-overlap ratio on the full space.
    Enhancement(ExperimentArgs),
    /// Second moments of Dirichlet weights.
    Moments(ExperimentArgs),
    /// Fourth-moment tensor and its pairing fit.
    Tensor(ExperimentArgs),
    /// Ratio for states restricted to a subset of symmetry sectors.
    Sector(ExperimentArgs),
    /// Finite-time averages converging to the spectral sum.
    Convergence(ExperimentArgs),
    /// Run every check at modest sample sizes.
    VerifyAll(SuiteArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON config file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_class)]
    class: Option<SymmetryClass>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `dirichlet` or `matrix`.
    #[arg(long, value_parser = parse_path)]
    path: Option<SamplingPath>,
    /// Sector dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    layout: Option<Vec<usize>>,
    /// Accessible sector indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    accessible: Option<Vec<usize>>,
    /// Horizons in inverse mean level spacings, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// Directory for `<name>.csv` and `<name>.json`; CSV goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_class(s: &str) -> std::result::Result<SymmetryClass, String> {
    s.parse().map_err(|e: birthmark::Error| e.to_string())
}

fn parse_path(s: &str) -> std::result::Result<SamplingPath, String> {
    s.parse().map_err(|e: birthmark::Error| e.to_string())
}

impl ExperimentArgs {
    fn overrides(self, experiment: Experiment) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::from_json_file(p)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            experiment: Some(experiment),
            class: self.class,
            n: self.n,
            samples: self.samples,
            seed: self.seed,
            path: self.path,
            layout: self.layout,
            accessible: self.accessible,
            horizons: self.horizons,
            out: self.out,
            workers: self.workers,
        };
        Ok(file.overlay(flags))
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(dir) => report.write_to(dir)?,
        None => print!("{}", report.csv),
    }
    eprint!("{}", report.verdict_table());
    Ok(())
}

fn execute(command: Command) -> Result<bool> {
    let (experiment, args) = match command {
        Command::Enhancement(a) => (Experiment::Enhancement, a),
        Command::Moments(a) => (Experiment::Moments, a),
        Command::Tensor(a) => (Experiment::Tensor, a),
        Command::Sector(a) => (Experiment::Sector, a),
        Command::Convergence(a) => (Experiment::Convergence, a),
        Command::VerifyAll(s) => {
            let mut all = true;
            for mut config in verification_suite(s.seed)? {
                config.workers = s.workers;
                let report = run_with_workers(&config)?;
                match &s.out {
                    Some(dir) => report.write_to(dir)?,
                    None => {}
                }
                print!("{}", report.verdict_table());
                all &= report.passed();
            }
            return Ok(all);
        }
    };
    let config = args.overrides(experiment)?.resolve()?;
    let report = run_with_workers(&config)?;
    emit(&report, config.out.as_ref())?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
