mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::RunReport;

#[derive(Parser, Debug)]
#[command(name = "nosig", version, about = "Frame functions, no-signalling checks and operator reconstruction")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON run report to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the JSON run report instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reconstruct the operator behind a frame function.
    Reconstruct(ReconstructArgs),
    /// Consistency checks.
    Check {
        #[command(subcommand)]
        what: CheckCommand,
    },
    /// CHSH value at fixed settings, or optimized over settings.
    Chsh(ChshArgs),
    /// Quantum-extension test of a correlation box, with the CHSH LP ladder.
    Prbox(PrboxArgs),
    /// Replay or search twist certificates for unentangled bases.
    Twist(TwistArgs),
    /// Orientation class (CP / CO_CP / BOTH / NEITHER) of an operator.
    Classify(ClassifyArgs),
    /// Sections over seeded context families.
    Section {
        #[command(subcommand)]
        action: SectionCommand,
    },
    /// Keller graph cliques and their product bases.
    Keller {
        #[command(subcommand)]
        action: KellerCommand,
    },
}

#[derive(Args, Debug, Clone)]
pub struct OperatorSource {
    /// Operator JSON file.
    #[arg(long = "t", value_name = "PATH")]
    pub t: Option<PathBuf>,
    /// Built-in operator: singlet, phi-plus, half-swap, mixed2, mixed3,
    /// phi-plus3-pt, orientation-mix.
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum ReconstructPath {
    Pvm,
    Povm,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long, value_enum, default_value_t = ReconstructPath::Pvm)]
    pub path: ReconstructPath,
    #[command(flatten)]
    pub source: OperatorSource,
    /// Sample table (JSON, or CSV when the name ends in .csv).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Use the signalling family at this angle.
    #[arg(long)]
    pub signalling: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1.5)]
    pub oversample: f64,
    #[arg(long, default_value_t = nosig::gleason::DEFAULT_HOLDOUT)]
    pub holdout: f64,
    /// Random product effects added to the effect design.
    #[arg(long, default_value_t = 32)]
    pub extra: usize,
    /// Write the reconstructed operator here.
    #[arg(long)]
    pub write_t: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// No-signalling check of a box or a frame function.
    Nosig(NosigArgs),
}

#[derive(Args, Debug)]
pub struct NosigArgs {
    /// Correlation box JSON.
    #[arg(long = "box", value_name = "PATH")]
    pub box_path: Option<PathBuf>,
    /// Check the PR box.
    #[arg(long)]
    pub pr_box: bool,
    #[command(flatten)]
    pub source: OperatorSource,
    #[arg(long)]
    pub signalling: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct ChshArgs {
    #[command(flatten)]
    pub source: OperatorSource,
    #[arg(long = "box", value_name = "PATH")]
    pub box_path: Option<PathBuf>,
    #[arg(long)]
    pub optimize: bool,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Four Bloch directions `a;a';b;b'`, each `x,y,z`.
    #[arg(long)]
    pub settings: Option<String>,
}

#[derive(Args, Debug)]
pub struct PrboxArgs {
    /// Box to test instead of the PR box.
    #[arg(long = "box", value_name = "PATH")]
    pub box_path: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub ladder: Vec<usize>,
    #[arg(long)]
    pub skip_ladder: bool,
    /// Plot-ready CSV of the ladder.
    #[arg(long)]
    pub ladder_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TwistArgs {
    /// Use the shipped two-qutrit example basis and certificate.
    #[arg(long)]
    pub fig1: bool,
    /// Unentangled basis JSON.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Certificate JSON to replay.
    #[arg(long)]
    pub apply: Option<PathBuf>,
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long)]
    pub write_certificate: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: OperatorSource,
    /// Also factor the map into Kraus operators.
    #[arg(long)]
    pub kraus: bool,
    #[arg(long, default_value_t = 0)]
    pub jordan_trials: usize,
}

#[derive(Subcommand, Debug)]
enum SectionCommand {
    /// Tabulate a section over a seeded context family and check it.
    Build(SectionBuildArgs),
    /// Check a stored section against a stored family.
    Check(SectionCheckArgs),
}

#[derive(Args, Debug)]
pub struct SectionBuildArgs {
    #[command(flatten)]
    pub source: OperatorSource,
    #[arg(long)]
    pub signalling: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub dims: Vec<usize>,
    /// Random bases per site.
    #[arg(long, default_value_t = 5)]
    pub bases: usize,
    #[arg(long)]
    pub table_out: Option<PathBuf>,
    #[arg(long)]
    pub family_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SectionCheckArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub family: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum GraphArg {
    G,
    Gstar,
}

#[derive(Subcommand, Debug)]
enum KellerCommand {
    /// Check every pair of a clique file.
    Verify(KellerVerifyArgs),
    Search(KellerSearchArgs),
    /// Product basis of a tiling clique.
    Basis(KellerBasisArgs),
}

#[derive(Args, Debug)]
pub struct KellerVerifyArgs {
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphArg::Gstar)]
    pub graph: GraphArg,
}

#[derive(Args, Debug)]
pub struct KellerSearchArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = GraphArg::G)]
    pub graph: GraphArg,
    /// Complete search (n <= 3); otherwise seeded local search.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    #[arg(long)]
    pub write: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KellerBasisArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Write the basis JSON here.
    #[arg(long)]
    pub write: Option<PathBuf>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NOSIG_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("NOSIG_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("NOSIG_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: Cli, argv: Vec<String>) -> nosig::Result<RunReport> {
    let mut report = RunReport::new(argv, cli.seed);
    let seed = cli.seed;
    match cli.command {
        Command::Reconstruct(a) => commands::reconstruct(&a, seed, &mut report)?,
        Command::Check { what: CheckCommand::Nosig(a) } => commands::check_nosig(&a, seed, &mut report)?,
        Command::Chsh(a) => commands::chsh(&a, seed, &mut report)?,
        Command::Prbox(a) => commands::prbox(&a, seed, &mut report)?,
        Command::Twist(a) => commands::twist(&a, &mut report)?,
        Command::Classify(a) => commands::classify(&a, seed, &mut report)?,
        Command::Section { action: SectionCommand::Build(a) } => commands::section_build(&a, seed, &mut report)?,
        Command::Section { action: SectionCommand::Check(a) } => commands::section_check(&a, &mut report)?,
        Command::Keller { action: KellerCommand::Verify(a) } => commands::keller_verify(&a, &mut report)?,
        Command::Keller { action: KellerCommand::Search(a) } => commands::keller_search(&a, seed, &mut report)?,
        Command::Keller { action: KellerCommand::Basis(a) } => commands::keller_basis(&a, &mut report)?,
    }
    Ok(report)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (out, json) = (cli.out.clone(), cli.json);
    let report = match run(cli, argv[1..].to_vec()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = out {
        if let Err(e) = std::fs::write(&path, format!("{text}\n")) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if json {
        println!("{text}");
    } else {
        print!("{}", report.summary());
    }
    ExitCode::from(if report.passed() { 0 } else { 1 })
}
