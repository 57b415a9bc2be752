mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ace", version, about = "Atomic cluster expansion: bases, fitting and evaluation")]
pub struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Leave wall times out of reports so that reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate the basis specification and its RPI counts.
    Spec(SpecArgs),
    /// Precompute coupling blocks for a spec into the cache.
    Couple(CoupleArgs),
    /// Fit a linear potential to energies and forces.
    Fit(FitArgs),
    /// Evaluate a fitted potential on configurations.
    Eval(EvalArgs),
    /// Run property and oracle suites.
    Check(CheckArgs),
    /// Time standard against recursive evaluation.
    Bench(BenchArgs),
    /// Write a synthetic labelled dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DegreeArg {
    Weighted,
    Total,
    Tensor,
}

#[derive(Args, Debug)]
pub struct SpecArgs {
    /// Maximal correlation order N.
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub degree: f64,
    /// Element symbols or atomic numbers, comma separated.
    #[arg(long, default_value = "Si", value_delimiter = ',')]
    pub species: Vec<String>,
    #[arg(long, value_enum, default_value_t = DegreeArg::Weighted)]
    pub degree_kind: DegreeArg,
    /// Angular weight of the weighted degree.
    #[arg(long, default_value_t = 2.0)]
    pub wl: f64,
    #[arg(long)]
    pub l_max: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cg,
    Svd,
}

#[derive(Args, Debug)]
pub struct CacheArgs {
    /// Coupling cache directory.
    #[arg(long, env = "ACE_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Cg)]
    pub method: MethodArg,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Qr,
    Rrqr,
    Lsqr,
}

#[derive(Args, Debug)]
pub struct RadialArgs {
    /// Typical nearest-neighbour distance used by the radial transform.
    #[arg(long, default_value_t = 1.0)]
    pub r_nn: f64,
    #[arg(long, default_value_t = 3.0)]
    pub r_cut: f64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Qr)]
    pub solver: SolverArg,
    /// Rank tolerance (rrqr) or stopping tolerance (lsqr).
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 30.0)]
    pub energy_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub force_weight: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub radial: RadialArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub potential: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub forces: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Suites to run, comma separated, or `all`. The default runs the property suites.
    #[arg(long, value_delimiter = ',')]
    pub suite: Vec<String>,
    /// Corrupt one Clebsch–Gordan sign while building the invariance basis (negative control).
    #[arg(long)]
    pub inject_sign_defect: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4, 5, 6, 7])]
    pub orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = ace_core::bench::DEGREES)]
    pub degrees: Vec<usize>,
    #[arg(long, default_value_t = 9)]
    pub repetitions: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value = "Si", value_delimiter = ',')]
    pub species: Vec<String>,
    /// Correlation order of the reference potential.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 6.0)]
    pub degree: f64,
    /// Amplitude of the pair term outside the polynomial span.
    #[arg(long, default_value_t = 0.0)]
    pub perturbation: f64,
    #[arg(long, default_value_t = 3)]
    pub min_atoms: usize,
    #[arg(long, default_value_t = 8)]
    pub max_atoms: usize,
    /// Also write the reference potential.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub radial: RadialArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
