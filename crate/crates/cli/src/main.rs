//! `geomilne`: runs half-space, decomposition, expansion, transport and
//! limit studies from a JSON run configuration.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: {message}", if key.is_empty() { String::new() } else { format!(" at `{key}`") })]
    Config { key: String, message: String },
    #[error(transparent)]
    Solver(#[from] geomilne::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(geomilne::Error::NoConvergence { .. }) => 3,
            CliError::Solver(
                geomilne::Error::InvalidBoundary(_) | geomilne::Error::InvalidGrid(_) | geomilne::Error::InvalidInput(_),
            ) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Solver(geomilne::Error::NoConvergence { .. }) => "no_convergence",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
            CliError::Json(_) => "serialization",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::Config { key, .. } = self {
            v["key"] = json!(key);
        }
        v
    }
}

#[derive(Debug, Parser)]
#[command(name = "geomilne", version, about = "Boundary layers and diffusive limits for 2D steady transport")]
struct Cli {
    /// JSON run configuration; overrides --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Built-in configuration: unit-disk, ellipse, limit-study, verify.
    #[arg(long, global = true, default_value = "unit-disk")]
    preset: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Half-space problem with geometric correction at tau = 0.
    Milne,
    /// Half-space problem without geometric correction.
    FlatMilne,
    /// Split the in-flow datum into regular and grazing parts.
    Decompose,
    /// Build the interior and boundary-layer expansion.
    Expand {
        /// Also dump every regular layer as layer_<k>.csv.
        #[arg(long)]
        layers: bool,
    },
    /// Solve the 2D transport problem.
    Transport,
    /// Remainder decay over the configured epsilon list.
    LimitStudy,
    /// Run the acceptance suite.
    Verify {
        /// Only these criteria (1-10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Exit with status 1 if any criterion fails.
        #[arg(long)]
        strict: bool,
    },
    /// Print the resolved configuration as JSON.
    ShowConfig,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Milne => "milne",
            Command::FlatMilne => "flat-milne",
            Command::Decompose => "decompose",
            Command::Expand { .. } => "expand",
            Command::Transport => "transport",
            Command::LimitStudy => "limit-study",
            Command::Verify { .. } => "verify",
            Command::ShowConfig => "show-config",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::preset(&cli.preset)?,
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = resolve(cli)?;
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(0);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config {
                key: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let t0 = Instant::now();
    let mut status = 0;
    let outcome = match &cli.command {
        Command::Milne => commands::milne(&cfg, &dir, false)?,
        Command::FlatMilne => commands::milne(&cfg, &dir, true)?,
        Command::Decompose => commands::decompose_cmd(&cfg, &dir)?,
        Command::Expand { layers } => commands::expand(&cfg, &dir, *layers)?,
        Command::Transport => commands::transport(&cfg, &dir)?,
        Command::LimitStudy => commands::limit_study(&cfg, &dir)?,
        Command::Verify { only, strict } => {
            let (o, all) = commands::verify_cmd(&dir, only)?;
            if *strict && !all {
                status = 1;
            }
            o
        }
        Command::ShowConfig => unreachable!(),
    };
    write_manifest(&dir, cli.command.name(), &cfg, &outcome, t0.elapsed().as_secs_f64())?;
    Ok(status)
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    outcome: &commands::Outcome,
    seconds: f64,
) -> Result<(), CliError> {
    let m = json!({
        "command": command,
        "config": cfg,
        "versions": {
            "geomilne": env!("CARGO_PKG_VERSION"),
        },
        "files": outcome.files,
        "summary": outcome.summary,
        "timings": { "total_seconds": seconds },
    });
    let mut s = serde_json::to_string_pretty(&m)?;
    s.push('\n');
    std::fs::write(dir.join("manifest.json"), s)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let v = e.to_json();
            eprintln!("{}", serde_json::to_string(&v).unwrap_or_else(|_| e.to_string()));
            let dir = cli.out.clone().or_else(|| resolve(&cli).ok().map(|c| c.output_dir));
            if let Some(dir) = dir {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), format!("{v:#}\n"));
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
