use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fdnoise_cli::{
    cmd_probe, cmd_problems_list, cmd_profile, cmd_run, read_spec, CliError, OutputOptions, ProfileMode,
    ProfileRequest, Target,
};

#[derive(Parser)]
#[command(name = "fdnoise", version, about = "Finite-difference optimization experiments on noisy functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OutArgs {
    /// Output directory; refuses to overwrite existing artifacts without --force.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parent of the timestamped output directory used when --out is absent.
    #[arg(long, env = "FDNOISE_OUT")]
    out_root: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

impl From<OutArgs> for OutputOptions {
    fn from(a: OutArgs) -> Self {
        Self {
            out: a.out,
            out_root: a.out_root,
            force: a.force,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the problem catalog.
    Problems {
        #[command(subcommand)]
        action: ProblemsAction,
    },
    /// Run the experiment grid described by a spec file.
    Run {
        spec: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Log-ratio profile of run set A against run set B.
    Profile {
        /// runs.csv (or a directory holding one) for solver A.
        a: PathBuf,
        /// runs.csv (or a directory holding one) for solver B.
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Evals)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-6)]
        tau: f64,
        #[arg(long, value_enum, default_value_t = TargetArg::Gap)]
        target: TargetArg,
        /// Solver id to take from A when it holds several.
        #[arg(long)]
        solver_a: Option<String>,
        /// Solver id to take from B when it holds several.
        #[arg(long)]
        solver_b: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print differencing diagnostics for one problem.
    Probe {
        problem: String,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluation point, comma separated; defaults to the starting point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
}

#[derive(Subcommand)]
enum ProblemsAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Evals,
    Accuracy,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Gap,
    Relative,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Problems {
            action: ProblemsAction::List,
        } => print!("{}", cmd_problems_list()),
        Command::Run { spec, jobs, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| CliError::Usage(format!("{}: {e}", spec.display())))?;
            let parsed = read_spec(&spec)?;
            let summary = cmd_run(&parsed, Some(&text), jobs, &out.into())?;
            println!(
                "wrote {} runs to {}",
                summary.records.len(),
                summary.dir.join("runs.csv").display()
            );
            if !summary.errors.is_empty() {
                for e in &summary.errors {
                    eprintln!("error: {e}");
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::Profile {
            a,
            b,
            mode,
            tau,
            target,
            solver_a,
            solver_b,
            out,
        } => {
            let req = ProfileRequest {
                runs_a: a,
                runs_b: b,
                solver_a,
                solver_b,
                mode: match mode {
                    ModeArg::Evals => ProfileMode::Evals,
                    ModeArg::Accuracy => ProfileMode::Accuracy,
                },
                target: match target {
                    TargetArg::Gap => Target::Gap,
                    TargetArg::Relative => Target::Relative,
                },
                tau,
            };
            let (dir, profile) = cmd_profile(&req, &out.into())?;
            for e in &profile.entries {
                let flag = match (e.failed_a, e.failed_b) {
                    (true, true) => "  (both failed)",
                    (true, false) => "  (A failed)",
                    (false, true) => "  (B failed)",
                    _ => "",
                };
                println!("{:<12} {:>10.4}{flag}", e.problem_id, e.ratio);
            }
            println!("wrote {}", dir.display());
        }
        Command::Probe { problem, sigma, seed, x } => {
            print!("{}", cmd_probe(&problem, x.as_deref(), sigma, seed)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
