//! CSV tables exchanged between commands.

use std::io::{Read, Write};

use vru_core::pipeline::WindowRow;
use vru_core::Label;

use crate::{CliError, CliResult};

/// Leading columns of a features table, before the feature names.
pub const FEATURE_KEYS: [&str; 7] = ["window_id", "video_id", "track_id", "frame", "label", "tte", "imputed"];

/// Leading columns of a predictions table, before the per-class
/// probabilities `p_<class>`.
pub const PREDICTION_KEYS: [&str; 7] = ["window_id", "video_id", "track_id", "frame", "label", "tte", "pred"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn parse_opt<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> CliResult<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| CliError::Input(format!("row {line}: bad {what} '{s}'")))
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, line: usize) -> CliResult<f64> {
    s.parse()
        .map_err(|_| CliError::Input(format!("row {line}: bad number '{s}'")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<WindowRow>,
}

pub fn write_features<W: Write>(w: W, names: &[String], rows: &[WindowRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FEATURE_KEYS.iter().map(|s| s.to_string()).chain(names.iter().cloned()))?;
    for (i, r) in rows.iter().enumerate() {
        if r.values.len() != names.len() {
            return Err(CliError::Input(format!(
                "window {i} has {} values for {} columns",
                r.values.len(),
                names.len()
            )));
        }
        let keys = [
            i.to_string(),
            r.video_id.clone(),
            opt(r.track_id),
            r.frame.to_string(),
            opt(r.label),
            opt(r.tte),
            u8::from(r.imputed).to_string(),
        ];
        out.write_record(keys.into_iter().chain(r.values.iter().map(|&v| fmt_f64(v))))?;
    }
    out.flush()?;
    Ok(())
}

fn check_keys(header: &csv::StringRecord, keys: &[&str]) -> CliResult<()> {
    let found: Vec<&str> = header.iter().take(keys.len()).collect();
    if found != keys {
        return Err(CliError::Input(format!(
            "expected leading columns {}, found {}",
            keys.join(","),
            found.join(",")
        )));
    }
    Ok(())
}

struct Keys {
    video_id: String,
    track_id: Option<u64>,
    frame: i64,
    label: Option<Label>,
    tte: Option<i64>,
}

fn parse_keys(rec: &csv::StringRecord, line: usize) -> CliResult<Keys> {
    Ok(Keys {
        video_id: rec[1].to_string(),
        track_id: parse_opt(&rec[2], "track_id", line)?,
        frame: parse_opt(&rec[3], "frame", line)?
            .ok_or_else(|| CliError::Input(format!("row {line}: missing frame")))?,
        label: parse_opt(&rec[4], "label", line)?,
        tte: parse_opt(&rec[5], "tte", line)?,
    })
}

pub fn read_features<R: Read>(r: R) -> CliResult<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    check_keys(&header, &FEATURE_KEYS)?;
    let names: Vec<String> = header.iter().skip(FEATURE_KEYS.len()).map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let k = parse_keys(&rec, line)?;
        let imputed = match &rec[6] {
            "0" => false,
            "1" => true,
            other => return Err(CliError::Input(format!("row {line}: bad imputed flag '{other}'"))),
        };
        let values = rec
            .iter()
            .skip(FEATURE_KEYS.len())
            .map(|s| parse_f64(s, line))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(WindowRow {
            video_id: k.video_id,
            track_id: k.track_id,
            frame: k.frame,
            label: k.label,
            tte: k.tte,
            imputed,
            values,
        });
    }
    Ok(FeatureTable { names, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub video_id: String,
    pub track_id: Option<u64>,
    pub frame: i64,
    pub label: Option<Label>,
    pub tte: Option<i64>,
    pub pred: Label,
    pub proba: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub classes: Vec<Label>,
    pub rows: Vec<PredictionRow>,
}

pub fn write_predictions<W: Write>(w: W, table: &PredictionTable) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = PREDICTION_KEYS
        .iter()
        .map(|s| s.to_string())
        .chain(table.classes.iter().map(|c| format!("p_{c}")));
    out.write_record(header)?;
    for (i, r) in table.rows.iter().enumerate() {
        let keys = [
            i.to_string(),
            r.video_id.clone(),
            opt(r.track_id),
            r.frame.to_string(),
            opt(r.label),
            opt(r.tte),
            r.pred.to_string(),
        ];
        out.write_record(keys.into_iter().chain(r.proba.iter().map(|&v| fmt_f64(v))))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> CliResult<PredictionTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    check_keys(&header, &PREDICTION_KEYS)?;
    let classes = header
        .iter()
        .skip(PREDICTION_KEYS.len())
        .map(|h| {
            h.strip_prefix("p_")
                .and_then(|c| c.parse::<Label>().ok())
                .ok_or_else(|| CliError::Input(format!("bad probability column '{h}'")))
        })
        .collect::<CliResult<Vec<Label>>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let k = parse_keys(&rec, line)?;
        let pred =
            parse_opt(&rec[6], "pred", line)?.ok_or_else(|| CliError::Input(format!("row {line}: missing pred")))?;
        let proba = rec
            .iter()
            .skip(PREDICTION_KEYS.len())
            .map(|s| parse_f64(s, line))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(PredictionRow {
            video_id: k.video_id,
            track_id: k.track_id,
            frame: k.frame,
            label: k.label,
            tte: k.tte,
            pred,
            proba,
        });
    }
    Ok(PredictionTable { classes, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: Vec<f64>) -> WindowRow {
        WindowRow {
            video_id: "v,1".into(),
            track_id: Some(3),
            frame: 9,
            label: Some(Label::NC),
            tte: None,
            imputed: true,
            values: v,
        }
    }

    #[test]
    fn features_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let rows = vec![row(vec![0.1, -1e-300]), row(vec![std::f64::consts::PI, 2.0])];
        let mut buf = Vec::new();
        write_features(&mut buf, &names, &rows).unwrap();
        let t = read_features(&buf[..]).unwrap();
        assert_eq!(t.names, names);
        assert_eq!(t.rows, rows);
    }

    #[test]
    fn predictions_round_trip() {
        let t = PredictionTable {
            classes: vec![Label::C, Label::NC],
            rows: vec![PredictionRow {
                video_id: "v".into(),
                track_id: None,
                frame: -2,
                label: None,
                tte: Some(-4),
                pred: Label::C,
                proba: vec![0.75, 0.25],
            }],
        };
        let mut buf = Vec::new();
        write_predictions(&mut buf, &t).unwrap();
        assert_eq!(read_predictions(&buf[..]).unwrap(), t);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_features(&b"id,video\n"[..]).is_err());
    }
}
