use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use vru_core::SkeletonFrame;

fn vru(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vru"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = vru(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    vru(args).status.code().expect("exit code")
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn p(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.p(name).to_str().unwrap().to_string()
    }
}

const RECORD: &str = r#"{"video_id":"v","frame":0,"track_id":7,"bbox":[10,20,30,80],"keypoints":[[20,20,0.9],[15,25,0.9],[25,25,0.9],[16,50,0.9],[24,50,0.9],[16,70,0.9],[24,70,0.9],[16,95,0.9],[24,95,0.9]],"label":"NC","tte":null,"embedding":null,"role":"pedestrian"}"#;

/// A lone box moving right at 2 px per frame.
fn walker(frames: i64) -> String {
    (0..frames)
        .map(|f| {
            RECORD.replace(
                r#""frame":0,"track_id":7,"bbox":[10"#,
                &format!(r#""frame":{f},"track_id":null,"bbox":[{}"#, 10 + 2 * f),
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn corpus(d: &Dir) {
    ok(&[
        "synth",
        "--actions",
        "StartCrossing,Standing",
        "--per-action",
        "3",
        "--n-frames",
        "20",
        "--seed",
        "4",
        "--out",
        &d.s("corpus.jsonl"),
        "--manifest",
        &d.s("manifest.csv"),
    ]);
}

fn features(d: &Dir) {
    corpus(d);
    ok(&["track", &d.s("corpus.jsonl"), "--out", &d.s("tracked.jsonl")]);
    ok(&[
        "featurize",
        &d.s("tracked.jsonl"),
        "--T",
        "3",
        "--out",
        &d.s("features.csv"),
    ]);
}

fn model(d: &Dir) {
    features(d);
    ok(&[
        "train",
        &d.s("features.csv"),
        "--grid-trees",
        "5,10",
        "--grid-depth",
        "2,4",
        "--folds",
        "3",
        "--seed",
        "1",
        "--out",
        &d.s("model.json"),
    ]);
}

#[test]
fn synth_seeded_corpus_checksum() {
    let d = Dir::new();
    corpus(&d);
    assert_eq!(
        sha(&d.p("corpus.jsonl")),
        "3b17907f5774a1951989e3815b9d252443bdf7d32d2e3ad609081df5540c6f8f"
    );
    assert_eq!(
        sha(&d.p("manifest.csv")),
        "c733489b0585b93db26adc6eac5b7097dbdfe5f703eafdf625ec9698b7657bdf"
    );
}

#[test]
fn synth_zero_sequences_writes_empty_file() {
    let d = Dir::new();
    ok(&[
        "synth",
        "--actions",
        "Standing",
        "--per-action",
        "0",
        "--out",
        &d.s("c.jsonl"),
    ]);
    assert_eq!(fs::read_to_string(d.p("c.jsonl")).unwrap(), "");
}

#[test]
fn synth_rejects_unknown_action_and_wrong_role() {
    let d = Dir::new();
    assert_eq!(code(&["synth", "--actions", "Fly", "--out", &d.s("c.jsonl")]), 2);
    assert_eq!(code(&["synth", "--actions", "TurnLeft", "--out", &d.s("c.jsonl")]), 2);
    assert!(!d.p("c.jsonl").exists());
}

#[test]
fn perturb_zero_noise_round_trips_a_record() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), format!("{RECORD}\n")).unwrap();
    ok(&["perturb", &d.s("in.jsonl"), "--pct", "0", "--out", &d.s("out.jsonl")]);
    let a: SkeletonFrame = serde_json::from_str(RECORD).unwrap();
    let b: SkeletonFrame = serde_json::from_str(fs::read_to_string(d.p("out.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn perturb_empty_input_and_bad_pct() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), "").unwrap();
    ok(&["perturb", &d.s("in.jsonl"), "--pct", "0.2", "--out", &d.s("out.jsonl")]);
    assert_eq!(fs::read_to_string(d.p("out.jsonl")).unwrap(), "");
    assert_eq!(
        code(&["perturb", &d.s("in.jsonl"), "--pct", "-1", "--out", &d.s("x.jsonl")]),
        2
    );
}

#[test]
fn perturb_seeded_checksum() {
    let d = Dir::new();
    corpus(&d);
    ok(&[
        "perturb",
        &d.s("corpus.jsonl"),
        "--pct",
        "0.2",
        "--seed",
        "3",
        "--out",
        &d.s("noisy.jsonl"),
    ]);
    assert_eq!(
        sha(&d.p("noisy.jsonl")),
        "ccde9796f50676c26faf65080b077da6ab9ce0c9d537cc2bfdad017d9a2dcfe7"
    );
}

#[test]
fn track_single_object_gets_id_from_third_frame() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), walker(10)).unwrap();
    ok(&["track", &d.s("in.jsonl"), "--out", &d.s("out.jsonl")]);
    let ids: Vec<Option<u64>> = fs::read_to_string(d.p("out.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["track_id"].as_u64())
        .collect();
    let mut expected = vec![None, None];
    expected.extend(std::iter::repeat_n(Some(1), 8));
    assert_eq!(ids, expected);
}

#[test]
fn track_empty_input() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), "").unwrap();
    ok(&[
        "track",
        &d.s("in.jsonl"),
        "--out",
        &d.s("out.jsonl"),
        "--meta",
        &d.s("meta.json"),
    ]);
    assert_eq!(fs::read_to_string(d.p("out.jsonl")).unwrap(), "");
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(d.p("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["videos"].as_array().unwrap().len(), 0);
}

#[test]
fn track_strict_rejects_out_of_order_frames() {
    let d = Dir::new();
    let text = walker(3);
    let lines: Vec<&str> = text.lines().collect();
    fs::write(d.p("in.jsonl"), format!("{}\n{}\n{}\n", lines[0], lines[2], lines[1])).unwrap();
    assert_eq!(
        code(&["track", &d.s("in.jsonl"), "--strict", "--out", &d.s("out.jsonl")]),
        2
    );
    ok(&["track", &d.s("in.jsonl"), "--out", &d.s("out.jsonl")]);
}

#[test]
fn track_malformed_record_is_an_input_error() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), "{not json}\n").unwrap();
    assert_eq!(
        code(&["track", &d.s("in.jsonl"), "--strict", "--out", &d.s("out.jsonl")]),
        2
    );
}

#[test]
fn featurize_single_record() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), format!("{RECORD}\n")).unwrap();
    ok(&["featurize", &d.s("in.jsonl"), "--T", "1", "--out", &d.s("f.csv")]);
    let mut rdr = csv::Reader::from_path(d.p("f.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 7 + 396);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        &rows[0].iter().take(7).collect::<Vec<_>>(),
        &["0", "v", "7", "0", "NC", "", "0"]
    );
}

#[test]
fn featurize_empty_input_and_zero_window() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), "").unwrap();
    ok(&["featurize", &d.s("in.jsonl"), "--T", "2", "--out", &d.s("f.csv")]);
    assert_eq!(fs::read_to_string(d.p("f.csv")).unwrap().lines().count(), 1);
    assert_eq!(
        code(&["featurize", &d.s("in.jsonl"), "--T", "0", "--out", &d.s("g.csv")]),
        2
    );
}

#[test]
fn featurize_seeded_checksum() {
    let d = Dir::new();
    features(&d);
    assert_eq!(
        sha(&d.p("features.csv")),
        "49783a250b0925906bc7a3c458fbe4b521209891008691a98bfb92ed1dd9c036"
    );
}

#[test]
fn train_seeded_model_checksum() {
    let d = Dir::new();
    model(&d);
    assert_eq!(
        sha(&d.p("model.json")),
        "582b6a50ff141ff56b29fb8cabe2ba484cd53f5effb01afffb83724e3c502b78"
    );
}

#[test]
fn train_empty_table_is_an_input_error() {
    let d = Dir::new();
    fs::write(d.p("in.jsonl"), "").unwrap();
    ok(&["featurize", &d.s("in.jsonl"), "--T", "1", "--out", &d.s("f.csv")]);
    assert_eq!(code(&["train", &d.s("f.csv"), "--out", &d.s("m.json")]), 2);
    assert!(!d.p("m.json").exists());
}

#[test]
fn train_single_class_is_a_numerical_failure() {
    let d = Dir::new();
    fs::write(
        d.p("in.jsonl"),
        walker(12).replace(r#""track_id":null"#, r#""track_id":1"#),
    )
    .unwrap();
    ok(&["featurize", &d.s("in.jsonl"), "--T", "1", "--out", &d.s("f.csv")]);
    let args = [
        "train",
        &d.s("f.csv"),
        "--grid-trees",
        "2",
        "--grid-depth",
        "2",
        "--folds",
        "2",
    ];
    assert_eq!(code(&[&args[..], &["--out", &d.s("m.json")]].concat()), 3);
}

#[test]
fn predict_round_trips_features_and_jsonl() {
    let d = Dir::new();
    model(&d);
    ok(&[
        "predict",
        &d.s("model.json"),
        &d.s("features.csv"),
        "--out",
        &d.s("p1.csv"),
    ]);
    ok(&[
        "predict",
        &d.s("model.json"),
        &d.s("tracked.jsonl"),
        "--out",
        &d.s("p2.csv"),
    ]);
    let rows = fs::read_to_string(d.p("p1.csv")).unwrap();
    assert_eq!(
        rows.lines().count(),
        fs::read_to_string(d.p("features.csv")).unwrap().lines().count()
    );
    assert!(rows.starts_with("window_id,video_id,track_id,frame,label,tte,pred,p_C,p_NC\n"));
    assert_eq!(
        sha(&d.p("p1.csv")),
        "1aa1d7d0e5c4a8d2ccdebbf362cfc7b55ddd6426c9223d0bb5c96e0f2356c267"
    );
}

#[test]
fn predict_empty_features() {
    let d = Dir::new();
    model(&d);
    let header = fs::read_to_string(d.p("features.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    fs::write(d.p("empty.csv"), header + "\n").unwrap();
    ok(&["predict", &d.s("model.json"), &d.s("empty.csv"), "--out", &d.s("p.csv")]);
    assert_eq!(fs::read_to_string(d.p("p.csv")).unwrap().lines().count(), 1);
}

#[test]
fn predict_with_missing_or_broken_model() {
    let d = Dir::new();
    features(&d);
    assert_eq!(
        code(&[
            "predict",
            &d.s("nope.json"),
            &d.s("features.csv"),
            "--out",
            &d.s("p.csv")
        ]),
        2
    );
    fs::write(d.p("bad.json"), "{}").unwrap();
    assert_eq!(
        code(&[
            "predict",
            &d.s("bad.json"),
            &d.s("features.csv"),
            "--out",
            &d.s("p.csv")
        ]),
        2
    );
}

#[test]
fn eval_report_and_curves() {
    let d = Dir::new();
    model(&d);
    ok(&[
        "predict",
        &d.s("model.json"),
        &d.s("features.csv"),
        "--out",
        &d.s("p.csv"),
    ]);
    ok(&[
        "eval",
        &d.s("p.csv"),
        "--manifest",
        &d.s("manifest.csv"),
        "--tte",
        "--out",
        &d.s("report.json"),
        "--plot-data",
        &d.s("plot.csv"),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.p("report.json")).unwrap()).unwrap();
    let acc = report["acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(fs::read_to_string(d.p("plot.csv"))
        .unwrap()
        .starts_with("action,tte,mean,std,n,predictability\n"));
    assert_eq!(
        sha(&d.p("report.json")),
        "5c7713fcd2cef45a1a057a6e1136d56cda593ebe13550d6ea91f4d5a67bc4baf"
    );
}

#[test]
fn eval_single_prediction() {
    let d = Dir::new();
    fs::write(
        d.p("p.csv"),
        "window_id,video_id,track_id,frame,label,tte,pred,p_C,p_NC\n0,v,1,5,C,,C,0.75,0.25\n",
    )
    .unwrap();
    ok(&["eval", &d.s("p.csv"), "--out", &d.s("r.json")]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.p("r.json")).unwrap()).unwrap();
    assert_eq!(report["acc"].as_f64(), Some(1.0));
}

#[test]
fn eval_empty_predictions_is_an_input_error() {
    let d = Dir::new();
    fs::write(
        d.p("p.csv"),
        "window_id,video_id,track_id,frame,label,tte,pred,p_C,p_NC\n",
    )
    .unwrap();
    assert_eq!(code(&["eval", &d.s("p.csv"), "--out", &d.s("r.json")]), 2);
    assert!(!d.p("r.json").exists());
}
