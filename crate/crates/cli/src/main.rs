use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isac_shield::harness::{
    emit_results, run_case_study, run_detection_sweep, run_eve_mode_comparison, run_tradeoff_sweep, verify,
    ExperimentResult, Format, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "isac-shield", version, about = "Sensing-secure ISAC waveform experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detection probability and KLD against target SNR, with and without security design.
    DetectionSweep(RunArgs),
    /// RD maps, PSLR and TF power of one sequence for beta in the case-study list.
    CaseStudy(RunArgs),
    /// Pd of BS and Eve and communication rate against beta for several clutter ladders.
    TradeoffSweep(RunArgs),
    /// The detection sweep with Eve-aware and Eve-agnostic optimization.
    EveCompare(RunArgs),
    /// Run the built-in oracle and identity checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// One annealing run per sweep point instead of one per sequence.
    #[arg(long)]
    amortized: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Accepted for symmetry with the other subcommands; unused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional report file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn init_pool(threads: Option<usize>) -> Result<(), String> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(args: RunArgs, f: fn(&ScenarioConfig) -> isac_shield::Result<ExperimentResult>) -> Result<(), String> {
    init_pool(args.threads)?;
    let mut cfg = ScenarioConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if args.amortized {
        cfg.experiment.amortized = true;
    }
    let result = f(&cfg).map_err(|e| e.to_string())?;
    emit_results(&result, &args.out, args.format).map_err(|e| e.to_string())?;
    eprintln!("{}: {} rows -> {}", result.id, result.rows.len(), args.out.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<bool, String> {
    init_pool(args.threads)?;
    let checks = verify::run_checks(args.seed).map_err(|e| e.to_string())?;
    let mut report = String::new();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        report.push_str(&format!("{status} {} {}\n", c.name, c.detail).replace(" \n", "\n"));
    }
    print!("{report}");
    if let Some(path) = args.out {
        std::fs::write(&path, &report).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::DetectionSweep(a) => run(a, run_detection_sweep).map(|_| true),
        Command::CaseStudy(a) => run(a, run_case_study).map(|_| true),
        Command::TradeoffSweep(a) => run(a, run_tradeoff_sweep).map(|_| true),
        Command::EveCompare(a) => run(a, run_eve_mode_comparison).map(|_| true),
        Command::Verify(a) => run_verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
