use vru_core::tracker::{Detection, TrackStatus, Tracker};
use vru_core::BBox;

fn walker(frame: i64) -> Detection {
    Detection::new(BBox::new(100.0 + 3.0 * frame as f64, 50.0, 40.0, 90.0), 0.9)
}

#[test]
fn constant_velocity_walker_gets_one_track_from_frame_three() {
    let mut tracker = Tracker::default();
    for f in 1..=60 {
        let snaps = tracker.step(&[walker(f)], f).unwrap();
        if f < 3 {
            assert!(snaps.is_empty(), "frame {f}");
        } else {
            assert_eq!(snaps.len(), 1, "frame {f}");
            assert_eq!(snaps[0].id, 1);
            assert_eq!(snaps[0].detection, Some(0));
        }
    }
    assert_eq!(tracker.tracks_created(), 1);
    let t = &tracker.tracks()[0];
    assert_eq!(t.status, TrackStatus::Confirmed);
    let (cx, _) = t.bbox().center();
    assert!((cx - (100.0 + 3.0 * 60.0 + 20.0)).abs() < 1.0, "{cx}");
}

#[test]
fn two_walkers_keep_their_ids_while_crossing_paths_apart() {
    let mut tracker = Tracker::default();
    let mut ids = std::collections::BTreeSet::new();
    for f in 1..=40 {
        let a = walker(f);
        let b = Detection::new(BBox::new(400.0 - 3.0 * f as f64, 250.0, 40.0, 90.0), 0.9);
        for s in tracker.step(&[a, b], f).unwrap() {
            ids.insert(s.id);
        }
    }
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn occlusion_shorter_than_max_age_keeps_the_id() {
    let mut tracker = Tracker::default();
    for f in 1..=10 {
        tracker.step(&[walker(f)], f).unwrap();
    }
    let snaps = tracker.step(&[walker(25)], 25).unwrap();
    assert_eq!(snaps.len(), 1);
    assert_eq!(snaps[0].id, 1);
    assert_eq!(snaps[0].detection, Some(0));
}
