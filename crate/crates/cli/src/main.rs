mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::Parser;
use gz_core::GzError;
use serde_json::json;

use crate::commands::Outcome;
use crate::config::{Cli, Command, RunConfig, SCHEMA};

/// Configuration problems exit with 2; numerical failures with 1.
fn is_config_error(e: &GzError) -> bool {
    matches!(
        e,
        GzError::InvalidSize(_)
            | GzError::InvalidSpec(_)
            | GzError::RepeatedSpectrum(..)
            | GzError::IndexOutOfRange { .. }
            | GzError::AmbientMismatch { .. }
    )
}

fn error_kind(e: &GzError) -> &'static str {
    match e {
        GzError::RetryExhausted(_) => "retry_exhausted",
        GzError::SingularChart { .. } => "singular_chart",
        GzError::TrackingAmbiguous { .. } => "tracking_ambiguous",
        GzError::NotSquareFree(..) => "not_square_free",
        GzError::PathThroughPuncture(_) => "path_through_puncture",
        GzError::RegularityLost { .. } => "regularity_lost",
        GzError::BranchJump { .. } => "branch_jump",
        GzError::NonFinite(_) => "non_finite",
        GzError::Degenerate(_) => "degenerate",
        _ => "error",
    }
}

fn emit(cfg: &RunConfig, status: &str, result: serde_json::Value) -> std::io::Result<()> {
    let report = json!({
        "schema": SCHEMA,
        "command": cfg.command,
        "timestamp": Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        "config": cfg,
        "status": status,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
            eprintln!("report written to {}", path.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match &cli.command {
        Command::VerifyClassical(a) => commands::verify_classical(a),
        Command::VerifyQuantum(a) => commands::verify_quantum(a),
        Command::Orbit(a) => commands::orbit(a),
        Command::Flow(a) => commands::flow(a),
    };
    match run {
        Ok((cfg, Outcome { ok, result, summary })) => {
            for line in &summary {
                eprintln!("{line}");
            }
            let status = if ok { "ok" } else { "violation" };
            eprintln!("status: {status}");
            if let Err(e) = emit(&cfg, status, result) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(2);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("failure ({}): {e}", error_kind(&e));
            ExitCode::from(1)
        }
    }
}
