use std::io::{BufRead, Write};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::skeleton::SkeletonFrame;

/// Field names of a keypoint record, in output order.
pub const RECORD_FIELDS: [&str; 9] = [
    "video_id",
    "frame",
    "track_id",
    "bbox",
    "keypoints",
    "label",
    "tte",
    "embedding",
    "role",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Unknown fields are an error.
    Strict,
    /// Unknown fields are dropped and reported.
    Lenient,
}

/// Parses one JSON line. Returns the frame and the names of any ignored
/// unknown fields.
pub fn parse_record(line: &str, mode: ParseMode) -> Result<(SkeletonFrame, Vec<String>)> {
    let mut value: Value = serde_json::from_str(line)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Format("record is not a JSON object".into()))?;
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !RECORD_FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        if mode == ParseMode::Strict {
            return Err(Error::Format(format!("unknown field(s): {}", unknown.join(", "))));
        }
        for k in &unknown {
            obj.remove(k);
        }
    }
    let frame: SkeletonFrame = serde_json::from_value(value)?;
    let k = frame.role.schema().len();
    if frame.keypoints.len() != k {
        return Err(Error::SchemaMismatch {
            expected: k,
            found: frame.keypoints.len(),
        });
    }
    if !(frame.bbox.w > 0.0 && frame.bbox.h > 0.0) {
        return Err(Error::Format("bbox width and height must be positive".into()));
    }
    Ok((frame, unknown))
}

/// Reads every non-blank line. Warnings carry the 1-based line number.
pub fn read_records<R: BufRead>(reader: R, mode: ParseMode) -> Result<(Vec<SkeletonFrame>, Vec<String>)> {
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (frame, unknown) = parse_record(&line, mode).map_err(|e| match e {
            Error::Json(j) => Error::Format(format!("line {}: {j}", n + 1)),
            Error::Format(m) => Error::Format(format!("line {}: {m}", n + 1)),
            other => other,
        })?;
        if !unknown.is_empty() {
            warnings.push(format!(
                "line {}: ignored unknown field(s) {}",
                n + 1,
                unknown.join(", ")
            ));
        }
        frames.push(frame);
    }
    Ok((frames, warnings))
}

pub fn record_line(frame: &SkeletonFrame) -> Result<String> {
    Ok(serde_json::to_string(frame)?)
}

pub fn write_records<W: Write>(mut w: W, frames: &[SkeletonFrame]) -> Result<()> {
    for f in frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{Label, Role};
    use proptest::prelude::*;

    const LINE: &str = r#"{"video_id":"v","frame":3,"track_id":null,"bbox":[1.0,2.0,3.0,4.0],"keypoints":[[0.0,0.0,1.0],[1.0,1.0,1.0],[2.0,2.0,1.0],[3.0,3.0,1.0],[4.0,4.0,1.0],[5.0,5.0,1.0],[6.0,6.0,1.0],[7.0,7.0,1.0],[8.0,8.0,1.0]],"label":"C","tte":-2,"embedding":null,"role":"pedestrian"}"#;

    #[test]
    fn parses_and_reserializes_exactly() {
        let (f, warn) = parse_record(LINE, ParseMode::Strict).unwrap();
        assert!(warn.is_empty());
        assert_eq!(f.label, Some(Label::C));
        assert_eq!(f.tte, Some(-2));
        assert_eq!(f.role, Role::Pedestrian);
        assert_eq!(record_line(&f).unwrap(), LINE);
    }

    #[test]
    fn unknown_fields() {
        let extra = LINE.replacen('{', r#"{"foo":1,"#, 1);
        assert!(parse_record(&extra, ParseMode::Strict).is_err());
        let (_, warn) = parse_record(&extra, ParseMode::Lenient).unwrap();
        assert_eq!(warn, vec!["foo".to_string()]);
    }

    #[test]
    fn wrong_keypoint_count() {
        let bad = LINE.replace(r#""role":"pedestrian""#, r#""role":"cyclist""#);
        assert!(matches!(
            parse_record(&bad, ParseMode::Strict),
            Err(Error::SchemaMismatch { expected: 13, found: 9 })
        ));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let input = format!("{LINE}\n\nnot json\n");
        let err = read_records(input.as_bytes(), ParseMode::Strict).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    proptest! {
        #[test]
        fn record_round_trip(
            frame in any::<i64>(),
            track in proptest::option::of(any::<u64>()),
            coords in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, 0.0f64..=1.0), 13),
            tte in proptest::option::of(-1000i64..1000),
            emb in proptest::option::of(proptest::collection::vec(-1.0f64..1.0, 0..8)),
        ) {
            let f = SkeletonFrame {
                video_id: "clip \"7\"".into(),
                frame,
                track_id: track,
                bbox: crate::skeleton::BBox::new(coords[0].0, coords[0].1, 10.5, 20.25),
                keypoints: coords.iter().map(|&(x, y, c)| crate::skeleton::Keypoint::new(x, y, c)).collect(),
                label: Some(Label::TurnLeft),
                tte,
                embedding: emb,
                role: Role::Cyclist,
            };
            let line = record_line(&f).unwrap();
            let (back, _) = parse_record(&line, ParseMode::Strict).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
