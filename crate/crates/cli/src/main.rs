use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thinpen_cli::{dispatch, load_config, CliError, Command};

#[derive(Parser)]
#[command(name = "thinpen", version, about = "Two-phase penalized thin obstacle laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve and write the field and solver report.
    Solve(Common),
    /// Radial functionals (H, D, P, phi, N, Ntilde, W) around each center.
    Functionals(Common),
    /// Fit homogeneous blow-ups at each center.
    Blowup(Common),
    /// Locate and classify free-boundary points.
    Freeboundary(Common),
    /// Run the audit suite over the canonical instances.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid spacing; overrides `[problem] h`.
    #[arg(long)]
    h: Option<f64>,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (cmd, args) = match cli.command {
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Functionals(a) => (Command::Functionals, a),
        Sub::Blowup(a) => (Command::Blowup, a),
        Sub::Freeboundary(a) => (Command::Freeboundary, a),
        Sub::Verify(a) => (Command::Verify, a),
    };
    let mut cfg = load_config(&args.config)?;
    if let Some(h) = args.h {
        cfg = cfg.with_h(h)?;
    }
    let out = args.out.unwrap_or_else(|| cfg.output.directory.clone());
    let outcome = dispatch(cmd, &cfg, &out)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for m in &outcome.messages {
        eprintln!("thinpen: {m}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("thinpen: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
