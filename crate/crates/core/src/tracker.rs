//! Full tracking pipeline: per frame, pair live tracks with detections via
//! Kalman-predicted Gaussian costs, terminate unmatched tracks, and start new
//! tracks from smooth triples of so-far-unclaimed detections in the three
//! most recent frames.

use nalgebra::Vector2;

use crate::assign::{solve_bipartite, solve_triplets, CostMatrix};
use crate::error::Result;
use crate::io::TrackRow;
use crate::kalman::{pair_cost, predict, update, KalmanState, MotionKind, MotionModel};
use crate::types::{AInitMode, FrameSeq, Link, LinkSet, LinkSource, TrackerConfig};

/// Motion model selection: the proposed acceleration model or the
/// constant-velocity baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackerMode {
    #[default]
    Accel,
    ConstVel,
}

impl TrackerMode {
    pub fn motion_kind(self) -> MotionKind {
        match self {
            TrackerMode::Accel => MotionKind::ConstantAcceleration,
            TrackerMode::ConstVel => MotionKind::ConstantVelocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Terminated,
}

/// One accepted localisation inside a track: its frame, its index within
/// that frame's detection list, and the measured position (µm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: usize,
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// A track: accepted localisations plus the filtered state at each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrack {
    pub id: u64,
    pub points: Vec<TrackPoint>,
    pub states: Vec<KalmanState>,
    pub status: TrackStatus,
}

impl KalmanTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_frame(&self) -> usize {
        self.points.first().map_or(0, |p| p.frame)
    }

    /// CSV rows in interface units: measured positions with the filtered
    /// velocity and acceleration.
    pub fn rows(&self) -> Vec<TrackRow> {
        self.points
            .iter()
            .zip(&self.states)
            .map(|(pt, st)| {
                let v = st.velocity_mm_s();
                let a = st.accel_mm_s2();
                TrackRow {
                    track_id: self.id,
                    frame: pt.frame,
                    x: pt.x,
                    y: pt.y,
                    vx: v.x,
                    vy: v.y,
                    ax: a.x,
                    ay: a.y,
                }
            })
            .collect()
    }
}

/// Initial state from a 3-frame triple (positions in µm).
///
/// The velocity estimate `(L12 + L23) / 2Δt` is the central-difference
/// velocity at the middle frame. In `Kinematic` mode the acceleration is
/// `(L23 − L12) / Δt²` and the velocity is advanced by one interval so the
/// state is the exact quadratic state at the third point; `CentralDiff`
/// keeps the central velocity and divides the step difference by `2Δt`.
pub fn init_state(
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    p3: Vector2<f64>,
    dt: f64,
    a_mode: AInitMode,
    model: &MotionModel,
    v_max_mm_s: f64,
) -> KalmanState {
    let l12 = p2 - p1;
    let l23 = p3 - p2;
    let v_mid = (l12 + l23) / (2.0 * dt);
    let (v, a) = match model.kind {
        MotionKind::ConstantVelocity => (v_mid, Vector2::zeros()),
        MotionKind::ConstantAcceleration => match a_mode {
            AInitMode::CentralDiff => (v_mid, (l23 - l12) / (2.0 * dt)),
            AInitMode::Kinematic => {
                let a = (l23 - l12) / (dt * dt);
                (v_mid + a * dt, a)
            }
        },
    };
    let mut s = nalgebra::Vector6::zeros();
    s[0] = p3.x;
    s[1] = v.x;
    s[2] = a.x;
    s[3] = p3.y;
    s[4] = v.y;
    s[5] = a.y;
    KalmanState::new(s, model.initial_covariance(v_max_mm_s))
}

/// States for the first two points of a fresh track, extrapolated backwards
/// from the initial state so states and points stay aligned.
fn backfill_states(
    init: &KalmanState,
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    dt: f64,
) -> [KalmanState; 2] {
    let v = init.velocity_um_s();
    let a = Vector2::new(init.s[2], init.s[5]);
    let make = |p: Vector2<f64>, steps_back: f64| {
        let vb = v - a * (dt * steps_back);
        let mut s = nalgebra::Vector6::zeros();
        s[0] = p.x;
        s[1] = vb.x;
        s[2] = a.x;
        s[3] = p.y;
        s[4] = vb.y;
        s[5] = a.y;
        KalmanState::new(s, init.p)
    };
    [make(p1, 2.0), make(p2, 1.0)]
}

struct Live {
    track: KalmanTrack,
    state: KalmanState,
}

/// Non-assignment cost: the pairing cost of an observation at Mahalanobis
/// distance 3 under the filter's steady-state innovation covariance.
///
/// The covariance recursion is iterated to its fixed point (predict/update
/// with zero innovation only touch P), then the cost at distance 3 is
/// `2π·√det(Σ)·exp(9/2)`. Anchoring the non-assignment price at the steady
/// state keeps the 3σ rule meaningful for established tracks while brand-new
/// tracks, whose inflated covariance makes true continuations land at tiny
/// Mahalanobis distances, still match.
fn null_cost(model: &MotionModel, cfg: &TrackerConfig) -> Result<f64> {
    let mut state = KalmanState::new(
        nalgebra::Vector6::zeros(),
        model.initial_covariance(cfg.v_max),
    );
    let mut trace = state.p.trace();
    for _ in 0..200 {
        state = update(&predict(&state, model), model, Vector2::zeros())?;
        let next = state.p.trace();
        if (next - trace).abs() <= 1e-12 * trace.abs().max(1.0) {
            break;
        }
        trace = next;
    }
    let predicted = predict(&state, model);
    let sigma = model.h * predicted.p * model.h.transpose() + model.r;
    let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
    let cost = std::f64::consts::TAU * det.sqrt() * (4.5f64).exp();
    Ok(cost.clamp(crate::kalman::COST_MIN, crate::kalman::COST_MAX))
}

/// Runs the tracker over a frame sequence. Returns the finished tracks (at
/// least `min_track_len` points, ordered by id) and their link set.
pub fn track(
    seq: &FrameSeq,
    cfg: &TrackerConfig,
    mode: TrackerMode,
) -> Result<(Vec<KalmanTrack>, LinkSet)> {
    cfg.validate()?;
    let dt = seq.dt();
    let model = MotionModel::new(mode.motion_kind(), dt, cfg.sigma_a, cfg.r_std);
    let gate = cfg.gate_um(seq.frame_rate);
    let null = null_cost(&model, cfg)?;

    let mut next_id = 0u64;
    let mut active: Vec<Live> = Vec::new();
    let mut finished: Vec<KalmanTrack> = Vec::new();
    // Detection indices still available for 3-frame initialisation.
    let mut unclaimed: Vec<Vec<usize>> = vec![Vec::new(); seq.n_frames()];

    for k in 0..seq.n_frames() {
        let dets = &seq.frames[k];
        let mut det_matched = vec![false; dets.len()];

        if !active.is_empty() {
            for live in &mut active {
                live.state = predict(&live.state, &model);
            }
            let mut row_matched = vec![false; active.len()];
            if !dets.is_empty() {
                let mut m = CostMatrix::new(active.len(), dets.len(), null)?;
                for (r, live) in active.iter().enumerate() {
                    let last = live.track.points.last().expect("track has points");
                    for (c, det) in dets.iter().enumerate() {
                        let z = det.position();
                        if (z - last.position()).norm() <= gate {
                            m.set(r, c, pair_cost(&live.state, &model, z)?)?;
                        }
                    }
                }
                for (r, c) in solve_bipartite(&m).pairs {
                    let live = &mut active[r];
                    let z = dets[c].position();
                    live.state = update(&live.state, &model, z)?;
                    live.track.points.push(TrackPoint {
                        frame: k,
                        index: c,
                        x: dets[c].x,
                        y: dets[c].y,
                    });
                    live.track.states.push(live.state.clone());
                    row_matched[r] = true;
                    det_matched[c] = true;
                }
            }
            let mut keep = Vec::with_capacity(active.len());
            for (r, mut live) in active.drain(..).enumerate() {
                if row_matched[r] {
                    keep.push(live);
                } else {
                    live.track.status = TrackStatus::Terminated;
                    finished.push(live.track);
                }
            }
            active = keep;
        }

        unclaimed[k] = (0..dets.len()).filter(|&c| !det_matched[c]).collect();

        // 3-frame initialisation over detections the 2D stage never claimed.
        if k >= 2 {
            let idx1 = unclaimed[k - 2].clone();
            let idx2 = unclaimed[k - 1].clone();
            let idx3 = unclaimed[k].clone();
            let pts = |frame: usize, idxs: &[usize]| -> Vec<Vector2<f64>> {
                idxs.iter()
                    .map(|&i| seq.frames[frame][i].position())
                    .collect()
            };
            let f1 = pts(k - 2, &idx1);
            let f2 = pts(k - 1, &idx2);
            let f3 = pts(k, &idx3);
            let triplets = solve_triplets(&f1, &f2, &f3, gate, cfg.init_cost_max);
            if !triplets.is_empty() {
                let mut used1 = vec![false; idx1.len()];
                let mut used2 = vec![false; idx2.len()];
                let mut used3 = vec![false; idx3.len()];
                for t in triplets {
                    let (p1, p2, p3) = (f1[t.i], f2[t.j], f3[t.k]);
                    let state = init_state(p1, p2, p3, dt, cfg.a_init_mode, &model, cfg.v_max);
                    let [s1, s2] = backfill_states(&state, p1, p2, dt);
                    let points = vec![
                        TrackPoint {
                            frame: k - 2,
                            index: idx1[t.i],
                            x: p1.x,
                            y: p1.y,
                        },
                        TrackPoint {
                            frame: k - 1,
                            index: idx2[t.j],
                            x: p2.x,
                            y: p2.y,
                        },
                        TrackPoint {
                            frame: k,
                            index: idx3[t.k],
                            x: p3.x,
                            y: p3.y,
                        },
                    ];
                    active.push(Live {
                        track: KalmanTrack {
                            id: next_id,
                            points,
                            states: vec![s1, s2, state.clone()],
                            status: TrackStatus::Active,
                        },
                        state,
                    });
                    next_id += 1;
                    used1[t.i] = true;
                    used2[t.j] = true;
                    used3[t.k] = true;
                }
                let strip = |idxs: &[usize], used: &[bool]| -> Vec<usize> {
                    idxs.iter()
                        .zip(used)
                        .filter(|(_, &u)| !u)
                        .map(|(&i, _)| i)
                        .collect()
                };
                unclaimed[k - 2] = strip(&idx1, &used1);
                unclaimed[k - 1] = strip(&idx2, &used2);
                unclaimed[k] = strip(&idx3, &used3);
            }
        }
    }

    for mut live in active.drain(..) {
        live.track.status = TrackStatus::Terminated;
        finished.push(live.track);
    }
    finished.retain(|t| t.len() >= cfg.min_track_len);
    finished.sort_by_key(|t| t.id);

    let mut links = LinkSet::new(LinkSource::Tracker);
    for t in &finished {
        for w in t.points.windows(2) {
            links.insert(Link::new(w[0].frame, w[0].index, w[1].index))?;
        }
    }
    Ok((finished, links))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Localization;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn seq_from_paths(frame_rate: f64, paths: &[Vec<(f64, f64)>]) -> FrameSeq {
        let n = paths.iter().map(Vec::len).max().unwrap_or(0);
        let mut seq = FrameSeq::new(frame_rate).unwrap();
        for frame in 0..n {
            for path in paths {
                if let Some(&(x, y)) = path.get(frame) {
                    seq.push(Localization::new(frame, x, y));
                }
            }
        }
        seq
    }

    #[test]
    fn init_state_uniform_motion() {
        let model = MotionModel::new(MotionKind::ConstantAcceleration, 0.04, 50.0, 10.0);
        let st = init_state(
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(2.0, 0.0),
            0.04,
            AInitMode::Kinematic,
            &model,
            20.0,
        );
        // 1 µm per 0.04 s step = 25 µm/s = 0.025 mm/s, zero acceleration.
        assert_abs_diff_eq!(
            st.velocity_mm_s(),
            Vector2::new(0.025, 0.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(st.accel_mm_s2(), Vector2::zeros(), epsilon = 1e-12);
        assert_eq!(st.position_um(), Vector2::new(2.0, 0.0));
    }

    #[test]
    fn init_state_central_diff_arithmetic() {
        // Central-difference reading: v = (L12+L23)/2Δt, a = (L23−L12)/2Δt.
        let model = MotionModel::new(MotionKind::ConstantAcceleration, 1.0, 50.0, 10.0);
        let st = init_state(
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(3.0, 0.0),
            1.0,
            AInitMode::CentralDiff,
            &model,
            20.0,
        );
        assert_relative_eq!(st.s[1], 1.5);
        assert_relative_eq!(st.s[2], 0.5);
    }

    #[test]
    fn init_state_kinematic_one_step_prediction_exact() {
        // Quadratic ground truth: one predict from the initial state lands on
        // the fourth point p3 + L23 + (L23 − L12).
        let dt = 0.04;
        let model = MotionModel::new(MotionKind::ConstantAcceleration, dt, 0.0, 10.0);
        let a_true = Vector2::new(800.0, -300.0); // µm/s²
        let v0 = Vector2::new(2000.0, 500.0); // µm/s
        let p0 = Vector2::new(100.0, 200.0);
        let pos = |i: f64| p0 + v0 * (i * dt) + a_true * 0.5 * (i * dt) * (i * dt);
        let (p1, p2, p3, p4) = (pos(0.0), pos(1.0), pos(2.0), pos(3.0));
        let st = init_state(p1, p2, p3, dt, AInitMode::Kinematic, &model, 20.0);
        let predicted = predict(&st, &model);
        let l12 = p2 - p1;
        let l23 = p3 - p2;
        assert_abs_diff_eq!(
            predicted.position_um(),
            p3 + l23 + (l23 - l12),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(predicted.position_um(), p4, epsilon = 1e-9);
    }

    #[test]
    fn single_constant_velocity_target() {
        let path: Vec<(f64, f64)> = (0..10).map(|i| (100.0 * i as f64, 50.0)).collect();
        let seq = seq_from_paths(25.0, &[path]);
        let cfg = TrackerConfig::default();
        let (tracks, links) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 10);
        assert_eq!(links.len(), 9);
        for (i, pt) in tracks[0].points.iter().enumerate() {
            assert_eq!(pt.position(), Vector2::new(100.0 * i as f64, 50.0));
        }
    }

    #[test]
    fn two_separated_parallel_targets_no_swap() {
        let gate = TrackerConfig::default().gate_um(25.0);
        let sep = 10.0 * gate;
        let a: Vec<(f64, f64)> = (0..8).map(|i| (100.0 * i as f64, 0.0)).collect();
        let b: Vec<(f64, f64)> = (0..8).map(|i| (100.0 * i as f64, sep)).collect();
        let seq = seq_from_paths(25.0, &[a, b]);
        let cfg = TrackerConfig::default();
        let (tracks, links) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        assert_eq!(tracks.len(), 2);
        assert_eq!(links.len(), 14);
        for t in &tracks {
            let y0 = t.points[0].y;
            assert!(t.points.iter().all(|p| p.y == y0), "identity swap");
        }
    }

    #[test]
    fn straight_line_baseline_matches_proposed() {
        // Zero acceleration: both motion models must produce the same links.
        let a: Vec<(f64, f64)> = (0..12)
            .map(|i| (120.0 * i as f64, 7.0 * i as f64))
            .collect();
        let b: Vec<(f64, f64)> = (0..12).map(|i| (4000.0 - 90.0 * i as f64, 900.0)).collect();
        let seq = seq_from_paths(25.0, &[a, b]);
        let cfg = TrackerConfig::default();
        let (_, links_acc) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        let (_, links_cv) = track(&seq, &cfg, TrackerMode::ConstVel).unwrap();
        assert_eq!(links_acc, links_cv);
        assert_eq!(links_acc.len(), 22);
    }

    #[test]
    fn no_detection_reused_and_links_within_gate() {
        // Crossing tracks with noise-free curvature.
        let a: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let t = i as f64;
                (100.0 * t, 10.0 * t * t)
            })
            .collect();
        let b: Vec<(f64, f64)> = (0..10).map(|i| (900.0 - 100.0 * i as f64, 300.0)).collect();
        let seq = seq_from_paths(25.0, &[a, b]);
        let cfg = TrackerConfig::default();
        let (tracks, links) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        let gate = cfg.gate_um(25.0);
        let mut used: std::collections::HashSet<(usize, usize)> = Default::default();
        for t in &tracks {
            for p in &t.points {
                assert!(used.insert((p.frame, p.index)), "detection used twice");
            }
        }
        for l in &links.links {
            let pa = seq.get(l.frame, l.a).unwrap().position();
            let pb = seq.get(l.frame + 1, l.b).unwrap().position();
            assert!((pb - pa).norm() <= gate + 1e-9);
        }
    }

    #[test]
    fn short_fragments_dropped() {
        // Two frames only: no triplet can form, so no tracks at all.
        let seq = seq_from_paths(25.0, &[vec![(0.0, 0.0), (10.0, 0.0)]]);
        let cfg = TrackerConfig::default();
        let (tracks, links) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        assert!(tracks.is_empty());
        assert!(links.is_empty());
    }

    #[test]
    fn deterministic_output() {
        let mut paths = Vec::new();
        for s in 0..6 {
            let phase = s as f64 * 0.7;
            paths.push(
                (0..20)
                    .map(|i| {
                        let t = i as f64 * 0.04;
                        (
                            500.0 * s as f64 + 3000.0 * t + 200.0 * (3.0 * t + phase).sin(),
                            900.0 * s as f64 + 150.0 * (2.0 * t + phase).cos(),
                        )
                    })
                    .collect(),
            );
        }
        let seq = seq_from_paths(25.0, &paths);
        let cfg = TrackerConfig::default();
        let (t1, l1) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        let (t2, l2) = track(&seq, &cfg, TrackerMode::Accel).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(l1, l2);
    }
}
