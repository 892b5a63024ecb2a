use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use vru_core::eval::{balance, EvalReport, RunMetadata, ScoredSequence};
use vru_core::forest::{classify, Decision};
use vru_core::Label;

use crate::table::{fmt_f64, read_predictions, PredictionTable};
use crate::{open, write_atomic, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub predictions: PathBuf,
    /// Sequence annotations: CSV with video_id, action, label, event_frame.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Subsample every class to the size of the smallest before scoring.
    #[arg(long)]
    pub balance_seed: Option<u64>,
    /// Compute time-to-event curves and predictability.
    #[arg(long)]
    pub tte: bool,
    #[arg(long, default_value_t = 0.5)]
    pub thr: f64,
    /// Window length recorded in the report metadata.
    #[arg(long = "T")]
    pub window: Option<usize>,
    #[arg(long)]
    pub noise_pct: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV series: action, tte, mean, std, n, predictability.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub action: String,
    pub label: Option<Label>,
    pub event_frame: Option<i64>,
}

pub fn read_manifest(path: &Path) -> CliResult<HashMap<String, ManifestEntry>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("manifest lacks column '{name}'")))
    };
    let (vi, ai, li, ei) = (col("video_id")?, col("action")?, col("label")?, col("event_frame")?);
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Input(format!("manifest row {}: bad {what}", i + 1));
        let label = match &rec[li] {
            "" => None,
            s => Some(s.parse::<Label>().map_err(|_| bad("label"))?),
        };
        let event_frame = match &rec[ei] {
            "" => None,
            s => Some(s.parse::<i64>().map_err(|_| bad("event_frame"))?),
        };
        out.insert(
            rec[vi].to_string(),
            ManifestEntry {
                action: rec[ai].to_string(),
                label,
                event_frame,
            },
        );
    }
    Ok(out)
}

/// Per-sequence probability series. A sequence is a (video, track) pair;
/// its score is the probability of the sequence's action class, taken from
/// the manifest or else from the label at the event.
pub fn scored_sequences(
    table: &PredictionTable,
    manifest: Option<&HashMap<String, ManifestEntry>>,
) -> Vec<ScoredSequence> {
    let mut groups: BTreeMap<(&str, Option<u64>), Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        groups.entry((r.video_id.as_str(), r.track_id)).or_default().push(i);
    }
    let mut out = Vec::new();
    for ((video, track), idx) in groups {
        let rows: Vec<_> = idx.iter().map(|&i| &table.rows[i]).collect();
        let event_label = rows
            .iter()
            .filter(|r| r.tte.is_some_and(|t| t <= 0))
            .min_by_key(|r| r.tte.map(i64::abs))
            .and_then(|r| r.label);
        let observed_event = rows.iter().find_map(|r| r.tte.map(|t| r.frame + t));
        let (action, class, event) = match manifest.and_then(|m| m.get(video)) {
            Some(e) => (
                e.action.clone(),
                e.label.or(event_label),
                e.event_frame.or(observed_event),
            ),
            None => match event_label {
                Some(l) => (l.to_string(), Some(l), observed_event),
                None => continue,
            },
        };
        let Some(ci) = class.and_then(|c| table.classes.iter().position(|&k| k == c)) else {
            continue;
        };
        let mut points: Vec<(i64, f64)> = rows.iter().map(|r| (r.frame, r.proba[ci])).collect();
        points.sort_by_key(|p| p.0);
        out.push(ScoredSequence {
            id: match track {
                Some(t) => format!("{video}/{t}"),
                None => video.to_string(),
            },
            action,
            event_frame: event,
            points,
        });
    }
    out
}

pub fn evaluate(table: &PredictionTable, args: &EvalArgs) -> CliResult<EvalReport> {
    if !(0.0..=1.0).contains(&args.thr) {
        return Err(CliError::Input(format!("--thr must lie in [0, 1], got {}", args.thr)));
    }
    let decision = if table.classes.len() == 2 {
        Decision::binary(args.thr)
    } else {
        Decision::Argmax
    };
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for r in &table.rows {
        if let Some(ci) = r.label.and_then(|l| table.classes.iter().position(|&c| c == l)) {
            preds.push(classify(&r.proba, decision));
            labels.push(ci);
        }
    }
    if let Some(seed) = args.balance_seed {
        let keep = balance(&labels, seed)?;
        preds = keep.iter().map(|&i| preds[i]).collect();
        labels = keep.iter().map(|&i| labels[i]).collect();
    }
    let manifest = args.manifest.as_deref().map(read_manifest).transpose()?;
    let sequences = if args.tte {
        scored_sequences(table, manifest.as_ref())
    } else {
        Vec::new()
    };
    let meta = RunMetadata {
        seeds: args.balance_seed.into_iter().collect(),
        window: args.window,
        noise_pct: args.noise_pct,
        balance_seed: args.balance_seed,
        threshold: args.thr,
    };
    let classes = table.classes.iter().map(|c| c.to_string()).collect();
    Ok(EvalReport::build(classes, &preds, &labels, &sequences, meta)?)
}

pub fn write_plot_data<W: Write>(w: W, report: &EvalReport) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["action", "tte", "mean", "std", "n", "predictability"])?;
    for (action, curve) in &report.tte_curves {
        let pred = report.predictability.get(action);
        for (i, p) in curve.iter().enumerate() {
            let frac = pred
                .and_then(|v| v.get(i))
                .filter(|q| q.tte == p.tte)
                .map_or_else(String::new, |q| fmt_f64(q.fraction));
            out.write_record([
                action.clone(),
                p.tte.to_string(),
                fmt_f64(p.mean),
                fmt_f64(p.std),
                p.n.to_string(),
                frac,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let table = read_predictions(open(&args.predictions)?)?;
    let report = evaluate(&table, args)?;
    write_atomic(&args.out, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    if let Some(p) = &args.plot_data {
        write_atomic(p, |w| write_plot_data(w, &report))?;
    }
    Ok(())
}
