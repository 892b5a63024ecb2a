use std::io::Read;
use std::path::PathBuf;

use clap::Args;
use vru_core::forest::{classify, Decision};
use vru_core::io::ModelFile;
use vru_core::pipeline::{Degenerate, WindowRow};
use vru_core::skeleton::DEFAULT_CMIN;

use super::featurize::{featurize_frames, GroupBy};
use super::train::infer_window;
use crate::table::{read_features, write_predictions, PredictionRow, PredictionTable};
use crate::{open, read_jsonl, write_atomic, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    /// Features CSV, or keypoint JSONL (`.jsonl`) featurized with the
    /// model's window and degenerate frames imputed.
    pub input: PathBuf,
    /// Decision threshold on the first class for binary models.
    #[arg(long, default_value_t = 0.5)]
    pub thr: f64,
    #[arg(long, value_enum, default_value_t = GroupBy::Track)]
    pub group_by: GroupBy,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn load_model(path: &std::path::Path) -> CliResult<ModelFile> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    Ok(ModelFile::from_json(&s)?)
}

pub fn predict_rows(model: &ModelFile, rows: &[WindowRow], thr: f64) -> CliResult<PredictionTable> {
    let forest = model.forest();
    let decision = if model.classes.len() == 2 {
        Decision::binary(thr)
    } else {
        Decision::Argmax
    };
    let rows = rows
        .iter()
        .map(|r| {
            let proba = forest.predict_proba(&r.values)?;
            Ok(PredictionRow {
                video_id: r.video_id.clone(),
                track_id: r.track_id,
                frame: r.frame,
                label: r.label,
                tte: r.tte,
                pred: model.classes[classify(&proba, decision)],
                proba,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(PredictionTable {
        classes: model.classes.clone(),
        rows,
    })
}

pub fn run(args: &PredictArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.thr) {
        return Err(CliError::Input(format!("--thr must lie in [0, 1], got {}", args.thr)));
    }
    let model = load_model(&args.model)?;
    let is_jsonl = args.input.extension().is_some_and(|e| e == "jsonl");
    let rows = if is_jsonl {
        let frames = read_jsonl(&args.input, false)?;
        featurize_frames(
            &frames,
            model.role,
            model.window,
            args.group_by,
            Degenerate::Impute,
            DEFAULT_CMIN,
        )?
        .1
    } else {
        let table = read_features(open(&args.input)?)?;
        if infer_window(&table, &model.layout())? != model.window {
            return Err(CliError::Input("feature window does not match the model".into()));
        }
        table.rows
    };
    let table = predict_rows(&model, &rows, args.thr)?;
    write_atomic(&args.out, |w| write_predictions(w, &table))
}
