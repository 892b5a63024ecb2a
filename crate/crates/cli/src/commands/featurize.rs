use std::path::PathBuf;

use clap::{Args, ValueEnum};
use vru_core::pipeline::{group_sequences, window_rows, Degenerate, Grouping, WindowRow};
use vru_core::skeleton::DEFAULT_CMIN;
use vru_core::{FeatureLayout, Role, SkeletonFrame};

use crate::table::write_features;
use crate::{read_jsonl, write_atomic, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    /// One sequence per (video, track id); records without a track id are skipped.
    Track,
    /// One sequence per video.
    Video,
}

impl From<GroupBy> for Grouping {
    fn from(g: GroupBy) -> Self {
        match g {
            GroupBy::Track => Grouping::Track,
            GroupBy::Video => Grouping::Video,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeaturizeArgs {
    pub input: PathBuf,
    /// Window length in frames.
    #[arg(long = "T", default_value_t = 14)]
    pub window: usize,
    #[arg(long, default_value = "pedestrian")]
    pub role: Role,
    #[arg(long, value_enum, default_value_t = GroupBy::Track)]
    pub group_by: GroupBy,
    /// Fill degenerate frames from the last valid one instead of dropping
    /// the windows that contain them.
    #[arg(long)]
    pub impute: bool,
    /// Minimum keypoint confidence.
    #[arg(long, default_value_t = DEFAULT_CMIN)]
    pub cmin: f64,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn featurize_frames(
    frames: &[SkeletonFrame],
    role: Role,
    window: usize,
    group_by: GroupBy,
    degenerate: Degenerate,
    cmin: f64,
) -> CliResult<(Vec<String>, Vec<WindowRow>)> {
    let layout = FeatureLayout::for_role(role);
    let skipped = frames.iter().filter(|f| f.role != role).count();
    if skipped > 0 {
        log::warn!("skipping {skipped} records that are not {role}");
    }
    let seqs = group_sequences(frames, role, group_by.into())?;
    let rows = window_rows(&seqs, &layout, window, cmin, degenerate)?;
    Ok((layout.names(window), rows))
}

pub fn run(args: &FeaturizeArgs) -> CliResult<()> {
    let frames = read_jsonl(&args.input, args.strict)?;
    let degenerate = if args.impute {
        Degenerate::Impute
    } else {
        Degenerate::Drop
    };
    let (names, rows) = featurize_frames(&frames, args.role, args.window, args.group_by, degenerate, args.cmin)?;
    log::info!("{} windows of {} features", rows.len(), names.len());
    write_atomic(&args.out, |w| write_features(w, &names, &rows))
}
