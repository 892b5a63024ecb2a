//! Height-normalized geometric skeleton features.
//!
//! Per frame, every unordered keypoint pair contributes the block
//! `(L, Lx, Ly, Theta)` and every unordered triplet its three interior
//! angles. Pairs come first in lexicographic order, then triplets. A window
//! of `T` frames concatenates the per-frame vectors oldest to newest.
//!
//! Feature names use canonical keypoint ids and a 1-based frame super-index:
//! `L^f(i,j)`, `Lx^f(i,j)`, `Ly^f(i,j)`, `Theta^f(i,j)` for pairs and
//! `Theta^f(a,v,b)` for the triangle angle at vertex `v` between `a < b`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::skeleton::{KeypointSchema, Role, SkeletonFrame};

/// Values per pair block.
pub const PAIR_BLOCK: usize = 4;
/// Values per triplet block.
pub const TRIPLET_BLOCK: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    schema: KeypointSchema,
    pairs: Vec<(usize, usize)>,
    triplets: Vec<(usize, usize, usize)>,
}

impl FeatureLayout {
    pub fn new(schema: KeypointSchema) -> Self {
        let k = schema.len();
        let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
        let mut triplets = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                pairs.push((i, j));
                for l in j + 1..k {
                    triplets.push((i, j, l));
                }
            }
        }
        triplets.sort_unstable();
        FeatureLayout {
            schema,
            pairs,
            triplets,
        }
    }

    pub fn for_role(role: Role) -> Self {
        Self::new(role.schema())
    }

    pub fn schema(&self) -> KeypointSchema {
        self.schema
    }

    /// Pairs of schema positions.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Triplets of schema positions.
    pub fn triplets(&self) -> &[(usize, usize, usize)] {
        &self.triplets
    }

    pub fn per_frame_len(&self) -> usize {
        PAIR_BLOCK * self.pairs.len() + TRIPLET_BLOCK * self.triplets.len()
    }

    pub fn dim(&self, window: usize) -> usize {
        self.per_frame_len() * window
    }

    /// Symbolic name of a feature in a `window`-frame vector.
    pub fn feature_name(&self, index: usize, window: usize) -> Result<String> {
        let dim = self.dim(window);
        if index >= dim {
            return Err(Error::FeatureIndex { index, dim });
        }
        let per = self.per_frame_len();
        let f = index / per + 1;
        let off = index % per;
        let ids = self.schema.ids();
        let pair_len = PAIR_BLOCK * self.pairs.len();
        if off < pair_len {
            let (i, j) = self.pairs[off / PAIR_BLOCK];
            let fam = ["L", "Lx", "Ly", "Theta"][off % PAIR_BLOCK];
            Ok(format!("{fam}^{f}({},{})", ids[i], ids[j]))
        } else {
            let off = off - pair_len;
            let (i, j, k) = self.triplets[off / TRIPLET_BLOCK];
            let (a, v, b) = match off % TRIPLET_BLOCK {
                0 => (j, i, k),
                1 => (i, j, k),
                _ => (i, k, j),
            };
            Ok(format!("Theta^{f}({},{},{})", ids[a], ids[v], ids[b]))
        }
    }

    /// Inverse of [`feature_name`](Self::feature_name).
    pub fn feature_index(&self, name: &str, window: usize) -> Result<usize> {
        let bad = || Error::UnknownFeature(name.to_string());
        let (fam, rest) = name.split_once('^').ok_or_else(bad)?;
        let (frame, args) = rest.split_once('(').ok_or_else(bad)?;
        let args = args.strip_suffix(')').ok_or_else(bad)?;
        let f: usize = frame.parse().map_err(|_| bad())?;
        if f == 0 || f > window {
            return Err(bad());
        }
        let pos = args
            .split(',')
            .map(|s| {
                s.parse::<u8>()
                    .ok()
                    .and_then(|id| self.schema.position(id))
                    .ok_or_else(bad)
            })
            .collect::<Result<Vec<_>>>()?;
        let base = (f - 1) * self.per_frame_len();
        let idx = match (fam, pos.as_slice()) {
            (_, &[i, j]) if i < j => {
                let slot = match fam {
                    "L" => 0,
                    "Lx" => 1,
                    "Ly" => 2,
                    "Theta" => 3,
                    _ => return Err(bad()),
                };
                let p = self.pairs.binary_search(&(i, j)).map_err(|_| bad())?;
                p * PAIR_BLOCK + slot
            }
            ("Theta", &[a, v, b]) if a < b && a != v && b != v => {
                let mut t = [a, v, b];
                t.sort_unstable();
                let slot = t.iter().position(|&p| p == v).expect("vertex is in triplet");
                let p = self.triplets.binary_search(&(t[0], t[1], t[2])).map_err(|_| bad())?;
                PAIR_BLOCK * self.pairs.len() + p * TRIPLET_BLOCK + slot
            }
            _ => return Err(bad()),
        };
        Ok(base + idx)
    }

    /// All feature names for a `window`-frame vector, in layout order.
    pub fn names(&self, window: usize) -> Vec<String> {
        (0..self.dim(window))
            .map(|i| self.feature_name(i, window).expect("index in range"))
            .collect()
    }
}

/// A per-frame or windowed feature vector, oldest frame first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub role: Role,
    pub window: usize,
    /// Number of triplets with coincident keypoints across all frames.
    pub degenerate_triplets: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-block of frame `f` (1-based).
    pub fn frame_block(&self, f: usize) -> &[f64] {
        let per = self.values.len() / self.window;
        &self.values[(f - 1) * per..f * per]
    }
}

/// Vertical extent of the skeleton's keypoints.
pub fn height_norm(frame: &SkeletonFrame) -> Result<f64> {
    let (lo, hi) = frame
        .keypoints
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            (lo.min(k.y), hi.max(k.y))
        });
    let h = hi - lo;
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::DegenerateFrame("zero height".into()))
    }
}

/// `(L, Lx, Ly, Theta)` for keypoints at schema positions `i` and `j`.
pub fn pair_features(frame: &SkeletonFrame, i: usize, j: usize, h: f64) -> (f64, f64, f64, f64) {
    let (a, b) = (&frame.keypoints[i], &frame.keypoints[j]);
    pair_block((a.x, a.y), (b.x, b.y), h)
}

fn pair_block(a: (f64, f64), b: (f64, f64), h: f64) -> (f64, f64, f64, f64) {
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    let mut theta = dy.atan2(dx);
    // atan2(-0.0, x < 0) is -pi; keep the range (-pi, pi].
    if theta == -PI {
        theta = PI;
    }
    (dx.hypot(dy) / h, dx.abs() / h, dy.abs() / h, theta)
}

/// Interior angles at `i`, `j`, `k`. Returns `None` as the second element
/// when two keypoints coincide, in which case all angles are zero.
pub fn triplet_angles(frame: &SkeletonFrame, i: usize, j: usize, k: usize) -> ((f64, f64, f64), bool) {
    let p = |n: usize| (frame.keypoints[n].x, frame.keypoints[n].y);
    triangle(p(i), p(j), p(k))
}

fn triangle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> ((f64, f64, f64), bool) {
    if a == b || b == c || a == c {
        return ((0.0, 0.0, 0.0), true);
    }
    let angle = |v: (f64, f64), p: (f64, f64), q: (f64, f64)| {
        let u = (p.0 - v.0, p.1 - v.1);
        let w = (q.0 - v.0, q.1 - v.1);
        let nu = u.0.hypot(u.1);
        let nw = w.0.hypot(w.1);
        ((u.0 * w.0 + u.1 * w.1) / (nu * nw)).clamp(-1.0, 1.0).acos()
    };
    ((angle(a, b, c), angle(b, a, c), angle(c, a, b)), false)
}

fn push_frame(layout: &FeatureLayout, frame: &SkeletonFrame, out: &mut Vec<f64>) -> Result<usize> {
    let schema = layout.schema();
    if frame.keypoints.len() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: schema.len(),
            found: frame.keypoints.len(),
        });
    }
    let h = height_norm(frame)?;
    for &(i, j) in layout.pairs() {
        let (l, lx, ly, t) = pair_features(frame, i, j, h);
        out.extend_from_slice(&[l, lx, ly, t]);
    }
    let mut degenerate = 0;
    for &(i, j, k) in layout.triplets() {
        let ((a, b, c), flag) = triplet_angles(frame, i, j, k);
        degenerate += flag as usize;
        out.extend_from_slice(&[a, b, c]);
    }
    Ok(degenerate)
}

/// Features of a single frame.
pub fn frame_features(frame: &SkeletonFrame, layout: &FeatureLayout) -> Result<FeatureVector> {
    window_features(std::slice::from_ref(frame), layout, 1)
}

/// Concatenated features of exactly `window` frames, oldest first.
pub fn window_features(frames: &[SkeletonFrame], layout: &FeatureLayout, window: usize) -> Result<FeatureVector> {
    if frames.len() != window || window == 0 {
        return Err(Error::Contract(format!(
            "window of {window} frames given {} frames",
            frames.len()
        )));
    }
    let mut values = Vec::with_capacity(layout.dim(window));
    let mut degenerate_triplets = 0;
    for f in frames {
        degenerate_triplets += push_frame(layout, f, &mut values)?;
    }
    Ok(FeatureVector {
        values,
        role: layout.schema().role(),
        window,
        degenerate_triplets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{BBox, Keypoint};

    fn frame(role: Role, pts: &[(f64, f64)]) -> SkeletonFrame {
        SkeletonFrame {
            video_id: "v".into(),
            frame: 0,
            track_id: None,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            keypoints: pts.iter().map(|&(x, y)| Keypoint::new(x, y, 1.0)).collect(),
            label: None,
            tte: None,
            embedding: None,
            role,
        }
    }

    fn ped_frame() -> SkeletonFrame {
        let pts: Vec<_> = (0..9)
            .map(|i| ((i as f64 * 1.7).sin() * 30.0, i as f64 * 12.0 + (i as f64).cos()))
            .collect();
        frame(Role::Pedestrian, &pts)
    }

    #[test]
    fn layout_lengths() {
        let ped = FeatureLayout::for_role(Role::Pedestrian);
        let cyc = FeatureLayout::for_role(Role::Cyclist);
        assert_eq!((ped.pairs().len(), ped.triplets().len()), (36, 84));
        assert_eq!(ped.per_frame_len(), 396);
        assert_eq!(cyc.per_frame_len(), 1170);
        assert_eq!(ped.dim(14), 5544);
    }

    #[test]
    fn height_cases() {
        let mut f = frame(Role::Pedestrian, &[(0.0, 10.0), (1.0, 40.0), (2.0, 110.0)]);
        assert_eq!(height_norm(&f).unwrap(), 100.0);
        for k in f.keypoints.iter_mut() {
            k.x *= 2.0;
            k.y *= 2.0;
        }
        assert_eq!(height_norm(&f).unwrap(), 200.0);
        let flat = frame(Role::Pedestrian, &[(0.0, 5.0), (3.0, 5.0)]);
        assert!(height_norm(&flat).is_err());
    }

    #[test]
    fn pair_examples() {
        let (l, lx, ly, t) = pair_block((0.0, 0.0), (3.0, 4.0), 5.0);
        assert!((l - 1.0).abs() < 1e-15);
        assert!((lx - 0.6).abs() < 1e-15);
        assert!((ly - 0.8).abs() < 1e-15);
        // atan(4/3) = 0.927295218001612...
        assert!((t - 0.927_295_218_001_612_2).abs() < 1e-12);
        assert_eq!(pair_block((2.0, 2.0), (2.0, 2.0), 1.0), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(pair_block((0.0, 0.0), (1.0, 0.0), 1.0), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(pair_block((0.0, 0.0), (-1.0, -0.0), 1.0).3, PI);
    }

    #[test]
    fn triangle_examples() {
        // Law of cosines for the 3-4-5 triangle: angle opposite the side
        // of length 3 is acos(4/5), opposite 4 is acos(3/5).
        let ((a, b, c), deg) = triangle((0.0, 0.0), (3.0, 0.0), (0.0, 4.0));
        assert!(!deg);
        assert!((a - PI / 2.0).abs() < 1e-12);
        assert!((b - (3.0f64 / 5.0).acos()).abs() < 1e-12);
        assert!((c - (4.0f64 / 5.0).acos()).abs() < 1e-12);
        assert!((b - 0.9273).abs() < 1e-4 && (c - 0.6435).abs() < 1e-4);

        let ((a, b, c), _) = triangle((0.0, 0.0), (1.0, 0.0), (2.0, 0.0));
        assert_eq!((a, b, c), (0.0, PI, 0.0));

        let s3 = 3f64.sqrt();
        let ((a, b, c), _) = triangle((0.0, 0.0), (2.0, 0.0), (1.0, s3));
        for v in [a, b, c] {
            assert!((v - PI / 3.0).abs() < 1e-12);
        }

        assert_eq!(triangle((1.0, 1.0), (1.0, 1.0), (0.0, 3.0)), ((0.0, 0.0, 0.0), true));
    }

    #[test]
    fn frame_vector_layout() {
        let f = ped_frame();
        let layout = FeatureLayout::for_role(Role::Pedestrian);
        let v = frame_features(&f, &layout).unwrap();
        assert_eq!(v.len(), 396);
        let h = height_norm(&f).unwrap();
        let (l, lx, ly, t) = pair_features(&f, 0, 1, h);
        assert_eq!(&v.values[0..4], &[l, lx, ly, t]);
        let ((a, b, c), _) = triplet_angles(&f, 6, 7, 8);
        assert_eq!(&v.values[393..396], &[a, b, c]);
    }

    #[test]
    fn window_concatenation() {
        let layout = FeatureLayout::for_role(Role::Pedestrian);
        let f = ped_frame();
        let single = frame_features(&f, &layout).unwrap();
        let w1 = window_features(std::slice::from_ref(&f), &layout, 1).unwrap();
        assert_eq!(single, w1);
        let w2 = window_features(&[f.clone(), f.clone()], &layout, 2).unwrap();
        assert_eq!(w2.frame_block(1), w2.frame_block(2));
        let frames = vec![f.clone(); 14];
        assert_eq!(window_features(&frames, &layout, 14).unwrap().len(), 5544);
        assert!(window_features(&frames, &layout, 13).is_err());
    }

    #[test]
    fn names() {
        let ped = FeatureLayout::for_role(Role::Pedestrian);
        assert_eq!(ped.feature_name(0, 1).unwrap(), "L^1(1,2)");
        assert_eq!(ped.feature_name(3, 1).unwrap(), "Theta^1(1,2)");
        assert!(ped.feature_name(396, 1).is_err());
        // Last triplet (11,12,13) positions (6,7,8); last slot is the angle at 13.
        assert_eq!(ped.feature_name(395, 1).unwrap(), "Theta^1(11,13,12)");

        let cyc = FeatureLayout::for_role(Role::Cyclist);
        let last = cyc.dim(14) - 1;
        assert_eq!(cyc.feature_name(last, 14).unwrap(), "Theta^14(11,13,12)");
        assert_eq!(cyc.feature_index("Theta^14(11,13,12)", 14).unwrap(), last);
        assert!(cyc.feature_index("Theta^15(11,13,12)", 14).is_err());
        assert!(cyc.feature_index("L^1(2,1)", 14).is_err());
        assert!(ped.feature_index("L^1(1,4)", 1).is_err());
    }

    #[test]
    fn names_round_trip() {
        for (role, t) in [(Role::Pedestrian, 3), (Role::Cyclist, 2)] {
            let layout = FeatureLayout::for_role(role);
            let names = layout.names(t);
            let unique: std::collections::BTreeSet<_> = names.iter().collect();
            assert_eq!(unique.len(), names.len());
            for (i, n) in names.iter().enumerate() {
                assert_eq!(layout.feature_index(n, t).unwrap(), i);
            }
        }
    }
}
