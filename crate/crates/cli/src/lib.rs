//! Command implementations behind the `vru` binary.
//!
//! Every command reads its inputs from files, writes its outputs atomically
//! and is a pure function of its arguments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod commands;
pub mod table;

pub use commands::{
    eval::EvalArgs, featurize::FeaturizeArgs, perturb::PerturbArgs, predict::PredictArgs, synth::SynthArgs,
    track::TrackArgs, train::TrainArgs,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed input or flags.
    #[error("{0}")]
    Input(String),
    /// The computation itself broke down.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<vru_core::Error> for CliError {
    fn from(e: vru_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "vru", version, about = "Skeleton-based intention recognition pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic keypoint corpus.
    Synth(SynthArgs),
    /// Assign track ids to detections.
    Track(TrackArgs),
    /// Turn tracks into windowed feature vectors.
    Featurize(FeaturizeArgs),
    /// Grid-search and fit a random forest.
    Train(TrainArgs),
    /// Score windows with a trained model.
    Predict(PredictArgs),
    /// Metrics, time-to-event curves and predictability.
    Eval(EvalArgs),
    /// Add keypoint or box noise.
    Perturb(PerturbArgs),
}

pub fn run(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Synth(a) => commands::synth::run(a),
        Command::Track(a) => commands::track::run(a),
        Command::Featurize(a) => commands::featurize::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Predict(a) => commands::predict::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Perturb(a) => commands::perturb::run(a),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes `path` via a temporary file in the same directory and a rename,
/// so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let tmp = builder.tempfile_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(())
}

fn read_jsonl(path: &Path, strict: bool) -> CliResult<Vec<vru_core::SkeletonFrame>> {
    let mode = if strict {
        vru_core::io::ParseMode::Strict
    } else {
        vru_core::io::ParseMode::Lenient
    };
    let (frames, warnings) = vru_core::io::read_records(open(path)?, mode)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(frames)
}

fn write_jsonl(path: &Path, frames: &[vru_core::SkeletonFrame]) -> CliResult<()> {
    write_atomic(path, |w| Ok(vru_core::io::write_records(w, frames)?))
}

fn parse_list(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Input(format!("not an integer list: {s}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("100, 200,300").unwrap(), vec![100, 200, 300]);
        assert!(parse_list("1,x").is_err());
    }

    #[test]
    fn exit_codes() {
        let e: CliError = vru_core::Error::NotPositiveDefinite.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = vru_core::Error::Format("x".into()).into();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(&p, |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
