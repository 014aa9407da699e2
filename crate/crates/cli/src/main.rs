use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rayzero::scalar::RankTol;
use rayzero_cli::config::{parse_config_with, BackendKind, Overrides};
use rayzero_cli::examples::{run_example, EXAMPLES};
use rayzero_cli::report::Report;
use rayzero_cli::run::{run, Command, RunError};

/// Threshold classification and resolvent expansions for discrete
/// Schrödinger operators on graphs with rays.
#[derive(Parser, Debug)]
#[command(name = "rayzero", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// Arithmetic backend; overrides the config.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Rank tolerance for the float backend.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Highest free kernel order kept by the expansion.
    #[arg(long, global = true)]
    kernel_cap: Option<usize>,
    /// Number of sites, nearest to the core first, in tables and residuals.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Comma-separated κ values for the residual check.
    #[arg(long, global = true, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    /// Truncation constant `c` in `L = ⌈c/κ⌉`.
    #[arg(long, global = true)]
    cutoff_const: Option<f64>,
    /// Directory receiving `report.json` and `summary.txt`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Rational,
    Float,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Classify the threshold and report the eigenspace dimensions.
    Classify { config: PathBuf },
    /// Classification plus bases of 𝖤, ℰ and Ẽ.
    Eigenbasis { config: PathBuf },
    /// Eigenbasis plus the kernels G₋₂ … G₁ on the window.
    Expand { config: PathBuf },
    /// Expansion plus the identity suite and the truncated-resolvent residuals.
    Verify { config: PathBuf },
    /// Run a worked example: star, family, freedim or spiderweb.
    Example { name: String },
}

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn overrides(g: &Global) -> Overrides {
    Overrides {
        backend: g.backend.map(|b| match b {
            BackendArg::Rational => BackendKind::Rational,
            BackendArg::Float => BackendKind::Float,
        }),
        rank_tol: g.rank_tol,
        kernel_cap: g.kernel_cap,
        window: g.window,
        kappas: g.kappas.clone(),
        cutoff_const: g.cutoff_const,
    }
}

/// Writes to `--out` if given, else to the config paths; prints the summary
/// when neither names a summary file.
fn deliver(rep: &Report, out: Option<&Path>, config_paths: (Option<PathBuf>, Option<PathBuf>)) -> Result<(), String> {
    let (report, summary) = match out {
        Some(dir) => (Some(dir.join("report.json")), Some(dir.join("summary.txt"))),
        None => config_paths,
    };
    rep.emit(report.as_deref(), summary.as_deref()).map_err(|e| e.to_string())?;
    if summary.is_none() {
        print!("{}", rep.summary());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<Report, (u8, String)> {
    let input = |e: String| (EXIT_INPUT, e);
    let out = cli.global.out.as_deref();
    let (rep, paths) = match cli.command {
        Sub::Example { name } => {
            if !EXAMPLES.contains(&name.as_str()) {
                return Err(input(format!("unknown example `{name}`; expected one of {}", EXAMPLES.join(", "))));
            }
            let tol = cli.global.rank_tol.unwrap_or(RankTol::default().0);
            (run_example(&name, tol).map_err(|e| input(e.to_string()))?, (None, None))
        }
        sub => {
            let (command, path) = match sub {
                Sub::Classify { config } => (Command::Classify, config),
                Sub::Eigenbasis { config } => (Command::Eigenbasis, config),
                Sub::Expand { config } => (Command::Expand, config),
                Sub::Verify { config } => (Command::Verify, config),
                Sub::Example { .. } => unreachable!("handled above"),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
            let cfg = parse_config_with(&text, &overrides(&cli.global)).map_err(|e| input(e.to_string()))?;
            let rep = run(command, &cfg).map_err(|e| match e {
                RunError::Input(_) => input(e.to_string()),
                RunError::Compute(_) => (EXIT_FAILED, e.to_string()),
            })?;
            let paths = (cfg.output.report.map(PathBuf::from), cfg.output.summary.map(PathBuf::from));
            (rep, paths)
        }
    };
    deliver(&rep, out, paths).map_err(|e| (EXIT_FAILED, e))?;
    Ok(rep)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(rep) if rep.passed() => ExitCode::SUCCESS,
        Ok(rep) => {
            for c in rep.failures() {
                eprintln!("FAIL {}: {}", c.name, c.detail);
            }
            ExitCode::from(EXIT_FAILED)
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
