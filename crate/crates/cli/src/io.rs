use std::fs;
use std::io::{IsTerminal, Write};
use std::path::Path;

use dptool_core::problem::ProblemSpec;
use dptool_core::DecisionProblem;
use serde::Serialize;

use crate::manifest::{Envelope, RunManifest};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_WELL_DEFINED: u8 = 2;
pub const EXIT_ZERO_VALUE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

/// A command that could not produce its report.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

pub type CmdResult = Result<u8, Failure>;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<(String, Vec<u8>), Failure> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::new(EXIT_USAGE, format!("{} is not UTF-8", path.display())))?;
    Ok((text, bytes))
}

pub fn parse_spec(path: &Path) -> Result<(ProblemSpec, Vec<u8>), Failure> {
    let (text, bytes) = read_text(path)?;
    let spec =
        ProblemSpec::from_json(&text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    Ok((spec, bytes))
}

/// Reads and validates a problem file. Returns the raw bytes for hashing.
pub fn load_problem(path: &Path) -> Result<(DecisionProblem, Vec<u8>), Failure> {
    let (spec, bytes) = parse_spec(path)?;
    let problem = spec.build().map_err(|report| {
        Failure::new(
            EXIT_INVALID,
            format!("{} is not a valid problem:\n{report}", path.display()),
        )
    })?;
    Ok((problem, bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))
}

fn stdout_write(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write to stdout: {e}")))
}

pub fn json_bytes<T: Serialize>(manifest: &RunManifest, report: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(&Envelope { manifest, report }).expect("reports serialize");
    text.push('\n');
    text.into_bytes()
}

/// Writes the JSON envelope to `out`, or stdout when absent.
pub fn emit_json<T: Serialize>(out: Option<&Path>, manifest: &RunManifest, report: &T) -> Result<(), Failure> {
    let bytes = json_bytes(manifest, report);
    match out {
        Some(path) => write_file(path, &bytes),
        None => stdout_write(&bytes),
    }
}

/// Writes row data to `out` and the manifest to stdout; with no `out` the
/// rows go to stdout and the manifest to stderr.
pub fn emit_rows(out: Option<&Path>, manifest: &RunManifest, rows: &[u8]) -> Result<(), Failure> {
    let manifest_text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    match out {
        Some(path) => {
            write_file(path, rows)?;
            stdout_write(format!("{manifest_text}\n").as_bytes())
        }
        None => {
            stdout_write(rows)?;
            eprintln!("{manifest_text}");
            Ok(())
        }
    }
}

pub fn print_text(text: &str) -> Result<(), Failure> {
    stdout_write(text.as_bytes())
}

fn color_enabled() -> bool {
    std::env::var_os("DPTOOL_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

/// Wraps `text` in an ANSI color (31 red, 32 green, 33 yellow) when stdout
/// is a terminal and DPTOOL_NO_COLOR is unset.
pub fn paint(text: &str, color: u8) -> String {
    if color_enabled() {
        format!("\x1b[{color}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}
