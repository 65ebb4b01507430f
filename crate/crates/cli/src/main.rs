use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spraylab_cli::commands::{self, Output};
use spraylab_cli::{CliError, RunConfig};

/// Numerical spray geometry: geodesics, curvature, projective factors,
/// path spaces and projective completion.
///
/// Exit codes: 0 success, 1 verification failed, 2 usage or configuration
/// error, 3 I/O error, 4 computation failed.
#[derive(Parser)]
#[command(name = "spraylab", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all sampling; overrides `settings.seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files (the geodesic command defaults to `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List sprays, factors, path families and completion strategies.
    List {
        /// Only one group: sprays, factors, families or strategies.
        group: Option<String>,
    },
    /// Evaluate the spray coefficients at the initial state.
    Eval,
    /// Riemann and Ricci curvature at the initial state.
    Curvature,
    /// Integrate a geodesic and write `trajectory.csv`.
    Geodesic,
    /// Estimate the maximal interval of the geodesic through the initial state.
    Probe,
    /// Construct a spray from a `pathspace:<family>` and check it.
    Construct,
    /// Projective completion of `completed:<base>+<strategy>`.
    Complete,
    /// Classify the factor profile and parameter relation along a geodesic.
    Classify,
    /// Run verification suites: all, A1..A8, or a suite name.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

const DEFAULT_SEED: u64 = spraylab_cli::config::DEFAULT_SEED;

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config <path>".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.settings.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::List { group } => commands::list(group.as_deref()),
        Command::Verify { suite } => commands::verify(suite, cli.seed.unwrap_or(DEFAULT_SEED)),
        Command::Eval => commands::eval(&load(cli)?),
        Command::Curvature => commands::curvature(&load(cli)?),
        Command::Geodesic => commands::geodesic(&load(cli)?),
        Command::Probe => commands::probe(&load(cli)?),
        Command::Construct => commands::construct(&load(cli)?),
        Command::Complete => commands::complete(&load(cli)?),
        Command::Classify => commands::classify(&load(cli)?),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::List { .. } => "list",
        Command::Eval => "eval",
        Command::Curvature => "curvature",
        Command::Geodesic => "geodesic",
        Command::Probe => "probe",
        Command::Construct => "construct",
        Command::Complete => "complete",
        Command::Classify => "classify",
        Command::Verify { .. } => "verify",
    }
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|mut out| {
        let name = command_name(&cli.command);
        let dir = match (&cli.out, &cli.command) {
            (Some(d), _) => Some(d.clone()),
            (None, Command::Geodesic) => Some(PathBuf::from(".")),
            (None, _) => None,
        };
        if let Some(dir) = dir {
            out.files
                .push((format!("{name}.json"), commands::pretty(&out.report)));
            write_files(&dir, &out.files)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            if cli.json {
                print!("{}", commands::pretty(&out.report));
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use spraylab_cli::exit;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_use_exit_code_two() {
        let err = Cli::try_parse_from(["spraylab", "frobnicate"])
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), exit::USAGE as i32);
    }
}
