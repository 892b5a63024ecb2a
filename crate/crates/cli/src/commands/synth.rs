use std::path::PathBuf;

use clap::Args;
use vru_core::synth::{corpus, CorpusSpec, SynthAction};
use vru_core::Role;

use crate::{open, write_atomic, write_jsonl, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON corpus recipe; overrides the other generation flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "pedestrian")]
    pub role: Role,
    /// Comma-separated actions (default: all actions of the role).
    #[arg(long, value_delimiter = ',')]
    pub actions: Vec<SynthAction>,
    #[arg(long, default_value_t = 10)]
    pub per_action: usize,
    #[arg(long, default_value_t = 40)]
    pub n_frames: usize,
    /// Gaussian keypoint jitter in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub prefix: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of video_id, action, label, event_frame.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl SynthArgs {
    pub fn corpus_spec(&self) -> CliResult<CorpusSpec> {
        if let Some(p) = &self.spec {
            return Ok(serde_json::from_reader(open(p)?)?);
        }
        let mut spec = match self.role {
            Role::Pedestrian => CorpusSpec::pedestrian(self.per_action, self.seed),
            Role::Cyclist => CorpusSpec::cyclist(self.per_action, self.seed),
        };
        if !self.actions.is_empty() {
            if let Some(a) = self.actions.iter().find(|a| a.role() != self.role) {
                return Err(CliError::Input(format!("{a} is not a {} action", self.role)));
            }
            spec.actions = self.actions.clone();
        }
        spec.n_frames = self.n_frames;
        spec.jitter_std_px = self.jitter;
        if let Some(p) = &self.prefix {
            spec.prefix = p.clone();
        }
        Ok(spec)
    }
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let spec = args.corpus_spec()?;
    let seqs = corpus(&spec)?;
    let frames: Vec<_> = seqs.iter().flat_map(|s| s.sequence.frames.iter().cloned()).collect();
    write_jsonl(&args.out, &frames)?;
    if let Some(path) = &args.manifest {
        write_atomic(path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["video_id", "action", "label", "event_frame"])?;
            for s in &seqs {
                let video = s.sequence.frames.first().map_or("", |f| f.video_id.as_str());
                out.write_record([
                    video.to_string(),
                    s.action.to_string(),
                    s.sequence.action_label.map_or_else(String::new, |l| l.to_string()),
                    s.sequence.event_frame.map_or_else(String::new, |e| e.to_string()),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    log::info!("wrote {} sequences, {} records", seqs.len(), frames.len());
    Ok(())
}
