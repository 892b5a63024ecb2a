use std::path::PathBuf;

use clap::{Args, ValueEnum};
use vru_core::perturb::{frame_bbox_noise, keypoint_noise, NoiseSpec};

use crate::{read_jsonl, write_jsonl, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseMode {
    /// Gaussian keypoint noise scaled by nearest-neighbor distance.
    Keypoints,
    /// Box corner noise at 10% of the box size.
    Bbox,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    pub input: PathBuf,
    /// Noise std as a fraction of each keypoint's nearest-neighbor distance.
    #[arg(long, default_value_t = 0.0)]
    pub pct: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseMode::Keypoints)]
    pub mode: NoiseMode,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &PerturbArgs) -> CliResult<()> {
    if !(args.pct >= 0.0 && args.pct.is_finite()) {
        return Err(CliError::Input(format!(
            "--pct must be a non-negative number, got {}",
            args.pct
        )));
    }
    let frames = read_jsonl(&args.input, args.strict)?;
    let spec = NoiseSpec::new(args.pct, args.seed);
    let out: Vec<_> = frames
        .iter()
        .map(|f| match args.mode {
            NoiseMode::Keypoints => keypoint_noise(f, &spec),
            NoiseMode::Bbox => frame_bbox_noise(f, args.seed),
        })
        .collect();
    write_jsonl(&args.out, &out)
}
