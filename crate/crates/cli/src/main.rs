use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use signet_cli::{run, Command, RunConfig, DEFAULT_MAX_DIM};

#[derive(Parser)]
#[command(name = "signet", version, about = "Sign-function solvers with error and resource certificates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// AX + XB = C from {"A","B","C"[,"tau"]}
    SolveSylvester,
    /// AXD + EXB = C from {"A","B","C","E","D"}
    SolveGeneralized,
    /// A*XE + E*XA = -Q from {"A","Q"[,"E"]}
    SolveLyapunov,
    /// A^{1/2} and A^{-1/2} from {"A"}
    Sqrt,
    /// A#B and its inverse from {"A","B"}
    Geomean,
    /// Stabilizing Riccati solution from {"A","G","Q"}
    Care,
    /// Shift-rotation and strip certificates from {"A","B"[,"C"]}
    Certify,
    /// Sign budget against the dense sign over a K list, from {"M"} or {"A","B","C"}
    VerifySign,
    /// Convergence or normalization sweep from {"kind","n","m","mu","beta"}
    Sweep,
    /// Kronecker-sum conditioning from {"A","B"[,"mu"]}
    Conditioning,
}

#[derive(Args)]
struct Opts {
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Report path (stdout when absent)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// CSV table path for verify-sign and sweep
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-6)]
    eps: f64,
    /// plain | rebalanced | banded (direct for solve-sylvester)
    #[arg(long, global = true, default_value = "rebalanced")]
    mode: String,
    /// fov | strip
    #[arg(long, global = true, default_value = "fov")]
    regime: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = signet_core::certificates::DEFAULT_ANGLES)]
    angles: usize,
    #[arg(long, global = true, default_value_t = signet_core::certificates::SAMPLED_SAFETY)]
    safety: f64,
    /// Comma-separated K values
    #[arg(long, global = true, value_delimiter = ',', default_values_t = signet_cli::DEFAULT_KS)]
    ks: Vec<usize>,
    /// Skip dense oracle comparisons
    #[arg(long, global = true)]
    no_verify: bool,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::SolveSylvester => Command::SolveSylvester,
            Cmd::SolveGeneralized => Command::SolveGeneralized,
            Cmd::SolveLyapunov => Command::SolveLyapunov,
            Cmd::Sqrt => Command::Sqrt,
            Cmd::Geomean => Command::Geomean,
            Cmd::Care => Command::Care,
            Cmd::Certify => Command::Certify,
            Cmd::VerifySign => Command::VerifySign,
            Cmd::Sweep => Command::Sweep,
            Cmd::Conditioning => Command::Conditioning,
        }
    }
}

fn max_dim() -> Result<usize, String> {
    match std::env::var("SIGNET_MAX_DIM") {
        Ok(v) => v.parse().map_err(|_| format!("SIGNET_MAX_DIM = {v:?} is not a positive integer")),
        Err(_) => Ok(DEFAULT_MAX_DIM),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let max_dim = match max_dim() {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let o = cli.opts;
    let config = RunConfig {
        input_path: o.input,
        output_path: o.output,
        csv_path: o.csv,
        eps: o.eps,
        mode: o.mode,
        regime: o.regime,
        seed: o.seed,
        angles: o.angles,
        safety: o.safety,
        ks: o.ks,
        no_verify: o.no_verify,
        max_dim,
        ..RunConfig::new(cli.command.into())
    };
    let (envelope, code) = run(&config);
    if let Some(err) = &envelope.error {
        eprintln!("error ({}): {}", err.class, err.message);
    }
    let json = envelope.to_json();
    let written = match &config.output_path {
        Some(path) => std::fs::write(path, json),
        None => {
            print!("{json}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(4);
    }
    if let (Some(path), Some(csv)) = (&config.csv_path, &envelope.csv) {
        if let Err(e) = std::fs::write(path, csv) {
            eprintln!("error: cannot write csv: {e}");
            return ExitCode::from(4);
        }
    }
    ExitCode::from(code as u8)
}
