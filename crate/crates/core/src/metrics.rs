//! Scoring: link-set comparison (true positive rate, false negative rate,
//! correctly-paired fraction), interpolation error against a dense
//! centerline, sweep summaries, and the downsampling consistency metric.

use std::collections::BTreeMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::interp::DenseTrack;
use crate::tracker::TrackerMode;
use crate::types::{FrameSeq, Link, LinkSet};

/// Link-level score of an estimated link set against ground truth.
///
/// `tpr = TP/(TP+FP)`, `fnr = 1 − TP/(TP+FN)` and
/// `cpf = (d(TP) − d(FP) − d(FN)) / (d(TP) + d(FP) + d(FN))`, with `d(·)`
/// the summed Euclidean link lengths per class. `degenerate` flags any
/// metric whose denominator was empty and was replaced by its sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub d_tp: f64,
    pub d_fp: f64,
    pub d_fn: f64,
    pub tpr: f64,
    pub fnr: f64,
    pub cpf: f64,
    pub degenerate: bool,
}

fn link_length(link: &Link, seq: &FrameSeq) -> Result<f64> {
    let a = seq.get(link.frame, link.a).ok_or_else(|| {
        Error::Data(format!(
            "link references missing localisation (frame {}, index {})",
            link.frame, link.a
        ))
    })?;
    let b = seq.get(link.frame + 1, link.b).ok_or_else(|| {
        Error::Data(format!(
            "link references missing localisation (frame {}, index {})",
            link.frame + 1,
            link.b
        ))
    })?;
    Ok((b.position() - a.position()).norm())
}

/// Scores `est` against `gt`: a link is a true positive iff it appears in
/// both sets with identical frame and endpoint indices.
pub fn score_links(est: &LinkSet, gt: &LinkSet, seq: &FrameSeq) -> Result<TrackScore> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    let (mut d_tp, mut d_fp, mut d_fn) = (0.0, 0.0, 0.0);

    for link in &est.links {
        let d = link_length(link, seq)?;
        if gt.contains(link) {
            tp += 1;
            d_tp += d;
        } else {
            fp += 1;
            d_fp += d;
        }
    }
    for link in &gt.links {
        if !est.contains(link) {
            fne += 1;
            d_fn += link_length(link, seq)?;
        }
    }

    let both_empty = est.is_empty() && gt.is_empty();
    let mut degenerate = false;
    let tpr = if tp + fp == 0 {
        degenerate = true;
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let fnr = if tp + fne == 0 {
        degenerate = true;
        if both_empty {
            0.0
        } else {
            1.0
        }
    } else {
        1.0 - tp as f64 / (tp + fne) as f64
    };
    let d_total = d_tp + d_fp + d_fn;
    let cpf = if d_total == 0.0 {
        degenerate = true;
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        (d_tp - d_fp - d_fn) / d_total
    };

    Ok(TrackScore {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fne,
        d_tp,
        d_fp,
        d_fn,
        tpr,
        fnr,
        cpf,
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// Interpolation error
// ---------------------------------------------------------------------------

/// Uniform bucket grid over a point cloud for nearest-point queries.
pub struct PointGrid {
    points: Vec<Vector2<f64>>,
    cell: f64,
    min: Vector2<f64>,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl PointGrid {
    pub fn build(points: &[Vector2<f64>], cell: f64) -> Self {
        assert!(cell > 0.0);
        let (mut min, mut max) = (
            Vector2::new(f64::INFINITY, f64::INFINITY),
            Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        if points.is_empty() {
            min = Vector2::zeros();
            max = Vector2::zeros();
        }
        let cols = (((max.x - min.x) / cell).floor() as usize) + 1;
        let rows = (((max.y - min.y) / cell).floor() as usize) + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, p) in points.iter().enumerate() {
            let cx = (((p.x - min.x) / cell).floor() as usize).min(cols - 1);
            let cy = (((p.y - min.y) / cell).floor() as usize).min(rows - 1);
            buckets[cy * cols + cx].push(i as u32);
        }
        PointGrid {
            points: points.to_vec(),
            cell,
            min,
            cols,
            rows,
            buckets,
        }
    }

    /// Distance to the nearest stored point (∞ for an empty grid).
    pub fn nearest_distance(&self, p: Vector2<f64>) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let cx = (((p.x - self.min.x) / self.cell).floor() as i64).clamp(0, self.cols as i64 - 1);
        let cy = (((p.y - self.min.y) / self.cell).floor() as i64).clamp(0, self.rows as i64 - 1);
        let mut best = f64::INFINITY;
        let max_ring = self.cols.max(self.rows) as i64;
        for ring in 0..=max_ring {
            // Once a hit exists, rings beyond best/cell cannot improve it.
            if best.is_finite() && (ring - 1) as f64 * self.cell > best {
                break;
            }
            let mut any_cell = false;
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // perimeter cells only
                    }
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= self.cols as i64 || y >= self.rows as i64 {
                        continue;
                    }
                    any_cell = true;
                    for &i in &self.buckets[y as usize * self.cols + x as usize] {
                        let d = (self.points[i as usize] - p).norm();
                        best = best.min(d);
                    }
                }
            }
            if !any_cell && best.is_finite() {
                break;
            }
        }
        best
    }
}

/// Mean/std/max of the per-sample nearest-point distance to the dense
/// ground-truth centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub n: usize,
}

pub fn interp_error(dense: &DenseTrack, centerline: &[Vector2<f64>]) -> Result<ErrorStats> {
    if dense.samples.is_empty() {
        return Err(Error::Data("no interpolated samples to score".into()));
    }
    if centerline.is_empty() {
        return Err(Error::Data("empty ground-truth centerline".into()));
    }
    let grid = PointGrid::build(centerline, 50.0);
    let dists: Vec<f64> = dense
        .samples
        .iter()
        .map(|s| grid.nearest_distance(Vector2::new(s.x, s.y)))
        .collect();
    let n = dists.len();
    let mean = dists.iter().sum::<f64>() / n as f64;
    let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    let max = dists.iter().copied().fold(0.0, f64::max);
    Ok(ErrorStats {
        mean,
        std: var.sqrt(),
        max,
        n,
    })
}

// ---------------------------------------------------------------------------
// Sweep summaries
// ---------------------------------------------------------------------------

/// One scored tracker run within a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    /// Dataset identifier (shared by the two modes of one cell).
    pub dataset: String,
    pub frame_rate: f64,
    pub accel_mm_s2: f64,
    pub concentration: String,
    pub seed: u64,
    pub mode: TrackerMode,
    pub score: TrackScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    FrameRate,
    Accel,
    Concentration,
}

/// Per-group aggregate of the three metrics for both modes, plus the paired
/// mean difference (proposed − baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub n_pairs: usize,
    /// [tpr, fnr, cpf]
    pub proposed_mean: [f64; 3],
    pub proposed_std: [f64; 3],
    pub baseline_mean: [f64; 3],
    pub baseline_std: [f64; 3],
    pub diff_mean: [f64; 3],
}

fn metrics_of(s: &TrackScore) -> [f64; 3] {
    [s.tpr, s.fnr, s.cpf]
}

fn mean_std(values: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let n = values.len() as f64;
    let mut mean = [0.0; 3];
    for v in values {
        for i in 0..3 {
            mean[i] += v[i] / n;
        }
    }
    let mut std = [0.0; 3];
    for v in values {
        for i in 0..3 {
            std[i] += (v[i] - mean[i]) * (v[i] - mean[i]) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
    }
    (mean, std)
}

/// Groups score rows by the requested keys and reports per-group mean, std
/// and the paired proposed−baseline mean difference. Every dataset in a
/// group must carry exactly one proposed and one baseline row.
pub fn summarize(rows: &[ScoreRow], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Data("no score rows to summarize".into()));
    }
    let group_label = |r: &ScoreRow| -> String {
        let mut parts = Vec::new();
        for k in keys {
            match k {
                GroupKey::FrameRate => parts.push(format!("frame_rate={}", r.frame_rate)),
                GroupKey::Accel => parts.push(format!("accel={}", r.accel_mm_s2)),
                GroupKey::Concentration => parts.push(format!("concentration={}", r.concentration)),
            }
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(" ")
        }
    };

    // group label → dataset → (proposed, baseline)
    type Paired = BTreeMap<String, (Option<TrackScore>, Option<TrackScore>)>;
    let mut groups: BTreeMap<String, Paired> = BTreeMap::new();
    for r in rows {
        let slot = groups
            .entry(group_label(r))
            .or_default()
            .entry(r.dataset.clone())
            .or_insert((None, None));
        let cell = match r.mode {
            TrackerMode::Accel => &mut slot.0,
            TrackerMode::ConstVel => &mut slot.1,
        };
        if cell.is_some() {
            return Err(Error::Data(format!(
                "duplicate score row for dataset {} mode {:?}",
                r.dataset, r.mode
            )));
        }
        *cell = Some(r.score);
    }

    let mut out = Vec::new();
    for (group, datasets) in groups {
        let mut proposed = Vec::new();
        let mut baseline = Vec::new();
        let mut diffs = Vec::new();
        for (dataset, (p, b)) in datasets {
            let (p, b) = match (p, b) {
                (Some(p), Some(b)) => (p, b),
                _ => {
                    return Err(Error::Data(format!(
                        "dataset {dataset} is missing one of the paired modes"
                    )))
                }
            };
            let (pm, bm) = (metrics_of(&p), metrics_of(&b));
            proposed.push(pm);
            baseline.push(bm);
            diffs.push([pm[0] - bm[0], pm[1] - bm[1], pm[2] - bm[2]]);
        }
        let (proposed_mean, proposed_std) = mean_std(&proposed);
        let (baseline_mean, baseline_std) = mean_std(&baseline);
        let (diff_mean, _) = mean_std(&diffs);
        out.push(SummaryRow {
            group,
            n_pairs: proposed.len(),
            proposed_mean,
            proposed_std,
            baseline_mean,
            baseline_std,
            diff_mean,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Downsampling consistency
// ---------------------------------------------------------------------------

/// Fraction of `factor`-frame link chains in the high-rate reference that
/// the downsampled subgroup results also recovered.
///
/// A chain starting at frame `f ≡ j (mod factor)` connecting localisation
/// `(f, a)` through `factor` consecutive reference links to `(f+factor, b)`
/// counts as retained iff subgroup `j` contains the link `(f/factor, a, b)`
/// in subgroup frame indexing. Returns `None` when the reference admits no
/// complete chain.
pub fn link_retention(
    reference: &LinkSet,
    subgroup_links: &[LinkSet],
    factor: usize,
) -> Option<f64> {
    assert!(factor >= 2, "downsampling factor must be at least 2");
    assert_eq!(subgroup_links.len(), factor, "one link set per subgroup");
    let next: BTreeMap<(usize, usize), usize> = reference
        .links
        .iter()
        .map(|l| ((l.frame, l.a), l.b))
        .collect();

    let mut total = 0usize;
    let mut kept = 0usize;
    for l in &reference.links {
        let f = l.frame;
        // Follow the chain f → f+factor starting from this link.
        let mut idx = l.a;
        let mut ok = true;
        for step in 0..factor {
            match next.get(&(f + step, idx)) {
                Some(&b) => idx = b,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        total += 1;
        let j = f % factor;
        let sub_frame = f / factor;
        if subgroup_links[j].contains(&Link::new(sub_frame, l.a, idx)) {
            kept += 1;
        }
    }
    if total == 0 {
        None
    } else {
        Some(kept as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::DenseSample;
    use crate::types::{LinkSource, Localization};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn seq_grid(n_frames: usize, per_frame: usize) -> FrameSeq {
        let mut seq = FrameSeq::new(25.0).unwrap();
        for f in 0..n_frames {
            for i in 0..per_frame {
                seq.push(Localization::new(
                    f,
                    100.0 * f as f64 + 3.0 * i as f64,
                    50.0 * i as f64,
                ));
            }
        }
        seq
    }

    fn links_of(pairs: &[(usize, usize, usize)], source: LinkSource) -> LinkSet {
        let mut ls = LinkSet::new(source);
        for &(f, a, b) in pairs {
            ls.insert(Link::new(f, a, b)).unwrap();
        }
        ls
    }

    #[test]
    fn perfect_tracking_scores_one() {
        let seq = seq_grid(4, 3);
        let gt = links_of(
            &[(0, 0, 0), (0, 1, 1), (1, 0, 0), (2, 2, 2)],
            LinkSource::GroundTruth,
        );
        let mut est = gt.clone();
        est.source = LinkSource::Tracker;
        let s = score_links(&est, &gt, &seq).unwrap();
        assert_eq!((s.tpr, s.fnr, s.cpf), (1.0, 0.0, 1.0));
        assert!(!s.degenerate);
    }

    #[test]
    fn arithmetic_of_rates() {
        // TP=8, FP=2 → tpr=0.8; TP=8, FN=2 → fnr=0.2.
        let seq = seq_grid(2, 12);
        let gt_pairs: Vec<_> = (0..10).map(|i| (0usize, i, i)).collect();
        let est_pairs: Vec<_> = (0..8)
            .map(|i| (0usize, i, i))
            .chain([(0usize, 10, 11), (0usize, 11, 10)])
            .collect();
        let gt = links_of(&gt_pairs, LinkSource::GroundTruth);
        let est = links_of(&est_pairs, LinkSource::Tracker);
        let s = score_links(&est, &gt, &seq).unwrap();
        assert_eq!(s.true_positives, 8);
        assert_eq!(s.false_positives, 2);
        assert_eq!(s.false_negatives, 2);
        assert_relative_eq!(s.tpr, 0.8);
        assert_relative_eq!(s.fnr, 0.2);
    }

    #[test]
    fn cpf_distance_arithmetic() {
        // d_tp=80, d_fp=10, d_fn=10 → cpf = (80−20)/100 = 0.6.
        let mut seq = FrameSeq::new(25.0).unwrap();
        for f in 0..2 {
            for i in 0..3 {
                // Distances: link (f,i,i) has length 10·(i+1) horizontally.
                seq.push(Localization::new(
                    f,
                    (f as f64) * 10.0 * (i as f64 + 1.0),
                    i as f64 * 1000.0,
                ));
            }
        }
        // gt: links 0 and 1 (lengths 10, 20 → wait lengths are 10·(i+1)).
        // est: link 0 and 1 shared, link 2 wrong direction.
        let gt = links_of(&[(0, 0, 0), (0, 1, 1), (0, 2, 2)], LinkSource::GroundTruth);
        let est = links_of(&[(0, 0, 0), (0, 1, 1)], LinkSource::Tracker);
        let s = score_links(&est, &gt, &seq).unwrap();
        assert_relative_eq!(s.d_tp, 30.0);
        assert_relative_eq!(s.d_fn, 30.0);
        assert_relative_eq!(s.cpf, 0.0);
        // Direct check of the formula on synthetic sums.
        let cpf = (80.0 - 10.0 - 10.0) / (80.0 + 10.0 + 10.0);
        assert_relative_eq!(cpf, 0.6);
    }

    #[test]
    fn degenerate_sentinels() {
        let seq = seq_grid(2, 2);
        let empty_est = LinkSet::new(LinkSource::Tracker);
        let empty_gt = LinkSet::new(LinkSource::GroundTruth);
        let s = score_links(&empty_est, &empty_gt, &seq).unwrap();
        assert!(s.degenerate);
        assert_eq!((s.tpr, s.fnr, s.cpf), (1.0, 0.0, 1.0));

        let gt = links_of(&[(0, 0, 0)], LinkSource::GroundTruth);
        let s = score_links(&empty_est, &gt, &seq).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.tpr, 0.0);
        assert_eq!(s.fnr, 1.0);
    }

    #[test]
    fn swap_symmetry() {
        let seq = seq_grid(3, 4);
        let est = links_of(&[(0, 0, 0), (0, 1, 2), (1, 3, 3)], LinkSource::Tracker);
        let gt = links_of(&[(0, 0, 0), (0, 2, 1), (1, 1, 1)], LinkSource::GroundTruth);
        let fwd = score_links(&est, &gt, &seq).unwrap();
        let rev = score_links(&gt, &est, &seq).unwrap();
        assert_eq!(fwd.false_positives, rev.false_negatives);
        assert_eq!(fwd.false_negatives, rev.false_positives);
        assert_relative_eq!(fwd.d_fp, rev.d_fn);
        assert_relative_eq!(fwd.tpr, 1.0 - rev.fnr);
    }

    #[test]
    fn removing_a_tp_strictly_lowers_cpf() {
        let seq = seq_grid(2, 4);
        let gt = links_of(&[(0, 0, 0), (0, 1, 1), (0, 2, 2)], LinkSource::GroundTruth);
        let full = links_of(&[(0, 0, 0), (0, 1, 1), (0, 2, 2)], LinkSource::Tracker);
        let reduced = links_of(&[(0, 0, 0), (0, 1, 1)], LinkSource::Tracker);
        let s_full = score_links(&full, &gt, &seq).unwrap();
        let s_red = score_links(&reduced, &gt, &seq).unwrap();
        assert!(s_red.cpf < s_full.cpf);
    }

    #[test]
    fn missing_localisation_is_an_error() {
        let seq = seq_grid(2, 1);
        let est = links_of(&[(0, 0, 5)], LinkSource::Tracker);
        let gt = LinkSet::new(LinkSource::GroundTruth);
        assert!(score_links(&est, &gt, &seq).is_err());
    }

    /// Brute-force oracle: naive set comparison without the incremental
    /// accounting of `score_links`.
    fn brute_score(est: &LinkSet, gt: &LinkSet, seq: &FrameSeq) -> (usize, usize, usize) {
        let e: Vec<_> = est.links.iter().collect();
        let g: Vec<_> = gt.links.iter().collect();
        let tp = e.iter().filter(|l| g.contains(l)).count();
        let _ = seq;
        (tp, e.len() - tp, g.len() - tp)
    }

    #[test]
    fn matches_brute_force_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(99);
        let seq = seq_grid(6, 8);
        for _ in 0..100 {
            let mut est = LinkSet::new(LinkSource::Tracker);
            let mut gt = LinkSet::new(LinkSource::GroundTruth);
            for f in 0..5 {
                for a in 0..8 {
                    if rng.gen_bool(0.3) {
                        let _ = est.insert(Link::new(f, a, rng.gen_range(0..8)));
                    }
                    if rng.gen_bool(0.3) {
                        let _ = gt.insert(Link::new(f, a, rng.gen_range(0..8)));
                    }
                }
            }
            let s = score_links(&est, &gt, &seq).unwrap();
            let (tp, fp, fne) = brute_score(&est, &gt, &seq);
            assert_eq!(
                (s.true_positives, s.false_positives, s.false_negatives),
                (tp, fp, fne)
            );
        }
    }

    #[test]
    fn interp_error_identity_and_offset() {
        let centerline: Vec<Vector2<f64>> =
            (0..1000).map(|i| Vector2::new(i as f64, 0.0)).collect();
        let on_line = DenseTrack {
            track_id: 0,
            samples: (0..50)
                .map(|i| DenseSample {
                    x: (i * 3) as f64,
                    y: 0.0,
                    speed: 1.0,
                    gradient: 0.0,
                    t: i as f64,
                })
                .collect(),
        };
        let s = interp_error(&on_line, &centerline).unwrap();
        assert_eq!(s.mean, 0.0);
        let offset = DenseTrack {
            track_id: 0,
            samples: on_line
                .samples
                .iter()
                .map(|s| DenseSample { y: 5.0, ..*s })
                .collect(),
        };
        let s = interp_error(&offset, &centerline).unwrap();
        assert_relative_eq!(s.mean, 5.0);
        assert_relative_eq!(s.std, 0.0);
        assert_relative_eq!(s.max, 5.0);
    }

    #[test]
    fn interp_error_empty_inputs() {
        let empty = DenseTrack {
            track_id: 0,
            samples: vec![],
        };
        assert!(interp_error(&empty, &[Vector2::zeros()]).is_err());
    }

    #[test]
    fn point_grid_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(5);
        let pts: Vec<Vector2<f64>> = (0..400)
            .map(|_| Vector2::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)))
            .collect();
        let grid = PointGrid::build(&pts, 37.0);
        for _ in 0..200 {
            let q = Vector2::new(rng.gen_range(-700.0..700.0), rng.gen_range(-700.0..700.0));
            let brute = pts
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert_relative_eq!(grid.nearest_distance(q), brute, max_relative = 1e-12);
        }
    }

    fn row(dataset: &str, mode: TrackerMode, tpr: f64, fnr: f64, cpf: f64) -> ScoreRow {
        ScoreRow {
            dataset: dataset.into(),
            frame_rate: 25.0,
            accel_mm_s2: 75.0,
            concentration: "mid".into(),
            seed: 1,
            mode,
            score: TrackScore {
                true_positives: 1,
                false_positives: 0,
                false_negatives: 0,
                d_tp: 1.0,
                d_fp: 0.0,
                d_fn: 0.0,
                tpr,
                fnr,
                cpf,
                degenerate: false,
            },
        }
    }

    #[test]
    fn summarize_singleton_and_identity() {
        let rows = vec![
            row("d0", TrackerMode::Accel, 0.9, 0.1, 0.8),
            row("d0", TrackerMode::ConstVel, 0.9, 0.1, 0.8),
        ];
        let table = summarize(&rows, &[GroupKey::Accel]).unwrap();
        assert_eq!(table.len(), 1);
        let r = &table[0];
        assert_eq!(r.n_pairs, 1);
        assert_eq!(r.proposed_mean, [0.9, 0.1, 0.8]);
        assert_eq!(r.proposed_std, [0.0, 0.0, 0.0]);
        assert_eq!(r.diff_mean, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn summarize_matches_independent_recomputation() {
        let mut rng = StdRng::seed_from_u64(17);
        let mut rows = Vec::new();
        let mut acc_tpr = Vec::new();
        for d in 0..7 {
            let tpr_a = rng.gen_range(0.5..1.0);
            let tpr_b = rng.gen_range(0.3..0.9);
            rows.push(row(&format!("d{d}"), TrackerMode::Accel, tpr_a, 0.1, 0.5));
            rows.push(row(
                &format!("d{d}"),
                TrackerMode::ConstVel,
                tpr_b,
                0.2,
                0.4,
            ));
            acc_tpr.push((tpr_a, tpr_b));
        }
        let table = summarize(&rows, &[]).unwrap();
        assert_eq!(table.len(), 1);
        // Spreadsheet-style recomputation.
        let n = acc_tpr.len() as f64;
        let mean_a: f64 = acc_tpr.iter().map(|x| x.0).sum::<f64>() / n;
        let mean_diff: f64 = acc_tpr.iter().map(|x| x.0 - x.1).sum::<f64>() / n;
        assert_relative_eq!(table[0].proposed_mean[0], mean_a, max_relative = 1e-12);
        assert_relative_eq!(table[0].diff_mean[0], mean_diff, max_relative = 1e-12);
    }

    #[test]
    fn summarize_rejects_unpaired() {
        let rows = vec![row("d0", TrackerMode::Accel, 0.9, 0.1, 0.8)];
        assert!(summarize(&rows, &[]).is_err());
    }

    #[test]
    fn retention_counts_chains() {
        // Reference at 4 Hz equivalent: links 0→1→2→3→4 for one target.
        let mut reference = LinkSet::new(LinkSource::Tracker);
        for f in 0..8 {
            reference.insert(Link::new(f, 0, 0)).unwrap();
        }
        // Subgroup 0 (frames 0,4,8): recovered the chain 0→4 and 4→8.
        let mut sub0 = LinkSet::new(LinkSource::Tracker);
        sub0.insert(Link::new(0, 0, 0)).unwrap();
        sub0.insert(Link::new(1, 0, 0)).unwrap();
        let empty = LinkSet::new(LinkSource::Tracker);
        let subs = vec![sub0, empty.clone(), empty.clone(), empty];
        let r = link_retention(&reference, &subs, 4).unwrap();
        // Chains start at frames 0..=4 (five complete chains); frames 0 and 4
        // belong to subgroup 0 and both were kept; 1,2,3 were not.
        assert_relative_eq!(r, 2.0 / 5.0);
    }
}
