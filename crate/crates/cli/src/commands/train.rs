use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use vru_core::forest::{
    grid_search_cv, CvRow, CYCLIST_DEPTH_GRID, CYCLIST_TREE_GRID, PEDESTRIAN_DEPTH_GRID, PEDESTRIAN_TREE_GRID,
};
use vru_core::io::{ModelFile, TrainingMeta};
use vru_core::pipeline::design_matrix;
use vru_core::{FeatureLayout, ForestParams, Label, Role};

use crate::table::{fmt_f64, read_features, FeatureTable};
use crate::{open, parse_list, write_atomic, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Pedestrian,
    Cyclist,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub features: PathBuf,
    #[arg(long, default_value = "pedestrian")]
    pub role: Role,
    /// Grid preset; defaults to the one matching the role.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Comma-separated tree counts, overriding the preset.
    #[arg(long)]
    pub grid_trees: Option<String>,
    /// Comma-separated maximum depths, overriding the preset.
    #[arg(long)]
    pub grid_depth: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub cv_table: Option<PathBuf>,
    /// Top-25 feature importance report (CSV).
    #[arg(long)]
    pub importance: Option<PathBuf>,
}

impl TrainArgs {
    pub fn grids(&self) -> CliResult<(Vec<usize>, Vec<usize>)> {
        let preset = self.preset.unwrap_or(match self.role {
            Role::Pedestrian => Preset::Pedestrian,
            Role::Cyclist => Preset::Cyclist,
        });
        let (trees, depths) = match preset {
            Preset::Pedestrian => (PEDESTRIAN_TREE_GRID.to_vec(), PEDESTRIAN_DEPTH_GRID.to_vec()),
            Preset::Cyclist => (CYCLIST_TREE_GRID.to_vec(), CYCLIST_DEPTH_GRID.to_vec()),
        };
        Ok((
            self.grid_trees.as_deref().map_or(Ok(trees), parse_list)?,
            self.grid_depth.as_deref().map_or(Ok(depths), parse_list)?,
        ))
    }
}

/// Window length implied by a features header, checked against the layout.
pub fn infer_window(table: &FeatureTable, layout: &FeatureLayout) -> CliResult<usize> {
    let per = layout.per_frame_len();
    let n = table.names.len();
    if n == 0 || !n.is_multiple_of(per) {
        return Err(CliError::Input(format!(
            "{n} feature columns is not a multiple of {per} ({} layout)",
            layout.schema().role()
        )));
    }
    let window = n / per;
    if table.names != layout.names(window) {
        return Err(CliError::Input("feature columns do not match the layout".into()));
    }
    Ok(window)
}

pub const IMPORTANCE_TOP_N: usize = 25;

pub fn write_cv_table<W: Write>(w: W, rows: &[CvRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let folds = rows.first().map_or(0, |r| r.fold_scores.len());
    let header = ["n_trees", "max_depth", "mean", "std"]
        .into_iter()
        .map(String::from)
        .chain((1..=folds).map(|k| format!("fold_{k}")));
    out.write_record(header)?;
    for r in rows {
        let cells = [
            r.n_trees.to_string(),
            r.max_depth.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.std),
        ];
        out.write_record(cells.into_iter().chain(r.fold_scores.iter().map(|&s| fmt_f64(s))))?;
    }
    out.flush()?;
    Ok(())
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let table = read_features(open(&args.features)?)?;
    let layout = FeatureLayout::for_role(args.role);
    let window = infer_window(&table, &layout)?;
    let classes = Label::classes(args.role).to_vec();
    let (x, y) = design_matrix(&table.rows, &classes)?;
    if y.is_empty() {
        return Err(CliError::Input("no labeled windows to train on".into()));
    }
    let (trees, depths) = args.grids()?;
    let base = ForestParams {
        mtry: args.mtry,
        min_leaf: args.min_leaf,
        seed: args.seed,
        ..ForestParams::default()
    };
    let search = grid_search_cv(x.view(), &y, classes.len(), &trees, &depths, args.folds, &base)?;
    log::info!(
        "best n_trees={} max_depth={} on {} windows",
        search.best.n_trees,
        search.best.max_depth,
        y.len()
    );
    let report = search.model.importance_report(&layout, window, IMPORTANCE_TOP_N)?;
    let meta = TrainingMeta {
        seed: args.seed,
        folds: args.folds,
        tree_grid: trees,
        depth_grid: depths,
        n_samples: y.len(),
        cv_table: search.table.clone(),
    };
    let model = ModelFile::new(args.role, window, classes, search.model, meta);
    let json = model.to_json()?;
    write_atomic(&args.out, |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    if let Some(p) = &args.cv_table {
        write_atomic(p, |w| write_cv_table(w, &search.table))?;
    }
    if let Some(p) = &args.importance {
        write_atomic(p, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["rank", "feature", "importance"])?;
            for (i, (name, v)) in report.iter().enumerate() {
                out.write_record([(i + 1).to_string(), name.clone(), fmt_f64(*v)])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}
