mod args;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::Parser;
use ehr_denoise::par;

use args::{Cli, Command};
use manifest::{digests, manifest_path_for, RunManifest};

/// Bad command line; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A check command ran to completion but its check failed; exit code 3.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn main() -> ExitCode {
    match run_cli(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    use ehr_denoise::Error as E;
    if e.downcast_ref::<UsageError>().is_some() {
        return ("usage", 2);
    }
    if e.downcast_ref::<CheckFailed>().is_some() {
        return ("check-failed", 3);
    }
    if e.downcast_ref::<commands::ShapeMismatch>().is_some() {
        return ("shape", 1);
    }
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<E>() {
            let kind = match err {
                E::Shape { .. } => "shape",
                E::InvalidArgument(_) => "invalid-argument",
                E::Parse { .. } => "parse",
                E::NonFinite { .. } => "non-finite",
                E::Unreachable { .. } => "unreachable",
                E::Diverged { .. } => "diverged",
                E::SvdNoConvergence { .. } => "no-convergence",
                E::PrevalenceExceeded(_) => "prevalence-exceeded",
                E::TooManyInvalidReplicates { .. } => "bootstrap",
                E::Io { .. } => "io",
            };
            return (kind, 1);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 1);
        }
    }
    ("error", 1)
}

/// Collapses a clap error into one line, dropping usage and tips.
fn one_line(err: &clap::Error) -> String {
    err.to_string()
        .lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("tip:") && !l.starts_with("For more information"))
        .map(|l| l.strip_prefix("error: ").unwrap_or(l))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_cli(argv: Vec<OsString>) -> Result<()> {
    let config_path = config::find_config(&argv);
    let parse_argv = match &config_path {
        Some(p) => config::merge(argv.clone(), config::config_args(p)?),
        None => argv.clone(),
    };
    let cli = match Cli::try_parse_from(&parse_argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => bail!(UsageError(one_line(&e))),
    };
    if cli.threads == 0 {
        bail!(UsageError("--threads must be at least 1".into()));
    }
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest_file);
    }

    let outcome = par::with_threads(cli.threads, || commands::run(&cli.command))?;

    let mut inputs = outcome.inputs.clone();
    inputs.extend(config_path);
    let config = config_json(&cli.command)?;
    let seeds = config
        .get("seed")
        .and_then(|v| v.as_u64())
        .map(|s| [("seed".to_string(), s)].into_iter().collect())
        .unwrap_or_default();
    let m = RunManifest {
        tool: manifest::TOOL.into(),
        version: manifest::VERSION.into(),
        subcommand: cli.command.name().into(),
        argv: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        config,
        seeds,
        threads: cli.threads,
        inputs: digests(&inputs)?,
        outputs: digests(&outcome.outputs)?,
    };
    let path = cli.manifest.clone().unwrap_or_else(|| match outcome.outputs.first() {
        Some(p) => manifest_path_for(p),
        None => PathBuf::from(format!("{}.manifest.json", cli.command.name())),
    });
    m.save(&path)?;
    if let Some(f) = outcome.failure {
        bail!(CheckFailed(f));
    }
    Ok(())
}

fn config_json(cmd: &Command) -> Result<serde_json::Value> {
    Ok(match cmd {
        Command::Gen(a) => serde_json::to_value(a)?,
        Command::Corrupt(a) => serde_json::to_value(a)?,
        Command::Merge(a) => serde_json::to_value(a)?,
        Command::Train(a) => serde_json::to_value(a)?,
        Command::FitThresholds(a) => serde_json::to_value(a)?,
        Command::Denoise(a) => serde_json::to_value(a)?,
        Command::Baseline(a) => serde_json::to_value(a)?,
        Command::Eval(a) => serde_json::to_value(a)?,
        Command::Holdout(a) => serde_json::to_value(a)?,
        Command::Spectrum(a) => serde_json::to_value(a)?,
        Command::OracleCheck(a) => serde_json::to_value(a)?,
        Command::Gradcheck(a) => serde_json::to_value(a)?,
        Command::Replay(a) => serde_json::to_value(a)?,
    })
}

/// Re-runs the recorded command and checks every output digest.
fn replay(path: &std::path::Path) -> Result<()> {
    let m = RunManifest::load(path)?;
    if m.version != manifest::VERSION {
        eprintln!("replay: manifest written by version {}, running {}", m.version, manifest::VERSION);
    }
    m.check_inputs()?;
    let argv: Vec<OsString> = std::iter::once(OsString::from(manifest::TOOL))
        .chain(m.argv.iter().map(OsString::from))
        .collect();
    match run_cli(argv) {
        Ok(()) => {}
        Err(e) if e.downcast_ref::<CheckFailed>().is_some() => {}
        Err(e) => return Err(e),
    }
    let bad = m.mismatched_outputs()?;
    if !bad.is_empty() {
        let list: Vec<String> = bad.iter().map(|p| p.display().to_string()).collect();
        bail!(CheckFailed(format!("outputs differ from manifest: {}", list.join(", "))));
    }
    println!("replay: {} output(s) reproduced bitwise", m.outputs.len());
    Ok(())
}
