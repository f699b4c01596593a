use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpmoduli::runner::{self, CheckKind, ConfigError, RunOptions, Suite, SuiteConfig};
use serde_json::json;

/// Exact checks of quasi-Poisson structures on moduli spaces of flat connections.
#[derive(Parser)]
#[command(name = "qpmod", version)]
struct Cli {
  #[command(subcommand)]
  command: Command,
}

#[derive(Subcommand)]
enum Command {
  /// Parse a config, resolve its references and build the moduli space.
  Validate { config: PathBuf },
  /// Run the configured checks and print or write the JSON report.
  Run {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this check.
    #[arg(long = "check", value_parser = parse_check)]
    check: Option<CheckKind>,
    /// Add wall-clock timings (the report is then no longer reproducible).
    #[arg(long)]
    timing: bool,
  },
  /// Print the surface analysis and the terms of pi.
  Describe { config: PathBuf },
}

fn parse_check(s: &str) -> Result<CheckKind, String> {
  CheckKind::parse(s).ok_or_else(|| {
    let names: Vec<&str> = CheckKind::ALL.iter().map(|k| k.name()).collect();
    format!("unknown check {s:?}; expected one of {}", names.join(", "))
  })
}

fn load(path: &Path) -> Result<Suite, ConfigError> {
  let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unresolved(format!("{}: {e}", path.display())))?;
  runner::validate(&SuiteConfig::parse(&text)?)
}

// a closed pipe (e.g. `| head`) is not an error
fn emit(text: &str) {
  let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
  let cli = Cli::parse();
  let path = match &cli.command {
    Command::Validate { config } | Command::Run { config, .. } | Command::Describe { config } => config.clone(),
  };
  let suite = match load(&path) {
    Ok(s) => s,
    Err(e) => {
      eprintln!("error: {e}");
      return ExitCode::from(2);
    }
  };
  match cli.command {
    Command::Validate { .. } => {
      let names: Vec<&str> = suite.config.checks.iter().map(|k| k.name()).collect();
      println!("ok: {} (dim {}), checks: {}", path.display(), suite.space.dim(), names.join(", "));
      ExitCode::SUCCESS
    }
    Command::Describe { .. } => {
      let out = json!({
        "surface": runner::describe(&suite.space),
        "report": suite.space.report,
        "pi": runner::pi_terms(&suite.space),
      });
      emit(&serde_json::to_string_pretty(&out).expect("json"));
      ExitCode::SUCCESS
    }
    Command::Run { seed, points, out, check, timing, .. } => {
      if check.is_some_and(|c| !suite.config.checks.contains(&c)) {
        eprintln!("error: check {} is not configured", check.unwrap().name());
        return ExitCode::from(2);
      }
      let report = runner::run(&suite, &RunOptions { seed, points, only: check, timing });
      let text = report.to_json();
      match out {
        Some(file) => {
          if let Err(e) = std::fs::write(&file, text + "\n") {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(2);
          }
        }
        None => emit(&text),
      }
      if report.passed {
        ExitCode::SUCCESS
      } else {
        ExitCode::from(1)
      }
    }
  }
}
