//! Command-line front end: configuration, input loading, dispatch and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::run_command;
pub use config::{CommandName, Format, RunConfig};
pub use error::{CliError, CliResult};
pub use input::{load_inputs, InputKind, Loaded};
pub use report::{emit_report, ReportEnvelope, Verdict};

/// Exit status for a run whose verdicts all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a completed run with a failed verdict.
pub const EXIT_AUDIT_FAILED: i32 = 1;
/// Exit status for configuration, input or runtime errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chaining", version, about = "Generic chaining bounds and Monte Carlo audits")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandName,
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Cli {
    pub fn effective_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        cfg.command = Some(self.command);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = Some(t);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        Ok(cfg)
    }
}

fn report_error(err: &CliError) {
    let msg = serde_json::json!({"error": {"kind": err.kind(), "message": err.to_string()}});
    eprintln!("{msg}");
}

/// Runs a parsed invocation and returns its exit status.
pub fn execute(cli: &Cli) -> i32 {
    let result = cli.effective_config().and_then(|cfg| {
        let env = run_command(&cfg)?;
        emit_report(&env, cfg.out.as_deref(), cfg.format)?;
        Ok(env)
    });
    match result {
        Ok(env) if env.passed => EXIT_PASS,
        Ok(env) => {
            for v in env.verdicts.iter().filter(|v| !v.passed) {
                eprintln!("verdict failed: {}{}", v.name, v.detail.as_ref().map_or(String::new(), |d| format!(" ({d})")));
            }
            EXIT_AUDIT_FAILED
        }
        Err(e) => {
            report_error(&e);
            EXIT_ERROR
        }
    }
}

pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}
