use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use vru_core::features::window_features;
use vru_core::synth::{corpus, CorpusSpec};
use vru_core::tracker::{Detection, Tracker};
use vru_core::{BBox, DecisionForest, FeatureLayout, ForestParams, LabeledSequence, Role};

fn pedestrians(per_action: usize) -> Vec<LabeledSequence> {
    corpus(&CorpusSpec::pedestrian(per_action, 1))
        .unwrap()
        .into_iter()
        .map(|s| s.sequence)
        .collect()
}

fn features(c: &mut Criterion) {
    let seqs = pedestrians(1);
    let frames = &seqs[0].frames[..14];
    let layout = FeatureLayout::for_role(Role::Pedestrian);
    c.bench_function("window_features_t14", |b| {
        b.iter(|| window_features(frames, &layout, 14).unwrap())
    });
}

fn forest(c: &mut Criterion) {
    let seqs = pedestrians(10);
    let layout = FeatureLayout::for_role(Role::Pedestrian);
    let d = layout.dim(1);
    let mut x = Array2::zeros((seqs.len(), d));
    let mut y = Vec::new();
    for (i, s) in seqs.iter().enumerate() {
        let last = &s.frames[s.frames.len() - 1..];
        let v = window_features(last, &layout, 1).unwrap();
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&v.values[..]));
        y.push(usize::from(i % 2 == 0));
    }
    let params = ForestParams {
        n_trees: 50,
        max_depth: 10,
        ..ForestParams::default()
    };
    c.bench_function("forest_fit_50_trees", |b| {
        b.iter(|| DecisionForest::fit(x.view(), &y, 2, &params).unwrap())
    });
}

fn tracker(c: &mut Criterion) {
    let dets: Vec<Detection> = (0..10)
        .map(|i| Detection::new(BBox::new(60.0 * i as f64, 100.0, 40.0, 90.0), 0.9))
        .collect();
    c.bench_function("tracker_100_frames_10_objects", |b| {
        b.iter_batched(
            Tracker::default,
            |mut t| {
                for f in 0..100 {
                    t.step(&dets, f).unwrap();
                }
                t
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, features, forest, tracker);
criterion_main!(benches);
