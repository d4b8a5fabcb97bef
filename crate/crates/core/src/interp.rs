//! Trajectory densification between linked localisations: straight-line and
//! acceleration-based interpolation, plus per-sample speed gradients.
//!
//! The acceleration route solves the segment's kinematic equation for the
//! acceleration that carries the start point (with its filtered velocity)
//! exactly onto the end point, then samples the resulting curve.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::io::TrackRow;
use crate::tracker::KalmanTrack;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMethod {
    Linear,
    Accel,
}

/// Denominator for the speed gradient: rate of change per second (along-track
/// acceleration, mm/s²) or per millimetre of arc (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientBasis {
    #[default]
    PerTime,
    PerDistance,
}

/// One densified sample: position (µm), speed (mm/s), signed speed gradient,
/// and time since the first track point (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSample {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub gradient: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrack {
    pub track_id: u64,
    pub samples: Vec<DenseSample>,
}

/// Input to interpolation: track positions (µm) at one-frame spacing, with
/// per-point velocities (µm/s) when a filter state is available.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPath {
    pub track_id: u64,
    /// Frame interval, s.
    pub dt: f64,
    pub points: Vec<Vector2<f64>>,
    pub velocities: Option<Vec<Vector2<f64>>>,
}

impl TrackPath {
    pub fn from_track(track: &KalmanTrack, frame_rate: f64) -> Self {
        TrackPath {
            track_id: track.id,
            dt: 1.0 / frame_rate,
            points: track.points.iter().map(|p| p.position()).collect(),
            velocities: Some(track.states.iter().map(|s| s.velocity_um_s()).collect()),
        }
    }

    /// Builds from stored CSV rows (one track's rows, frame-ordered).
    pub fn from_rows(track_id: u64, rows: &[&TrackRow], frame_rate: f64) -> Self {
        TrackPath {
            track_id,
            dt: 1.0 / frame_rate,
            points: rows.iter().map(|r| Vector2::new(r.x, r.y)).collect(),
            velocities: Some(
                rows.iter()
                    .map(|r| Vector2::new(units::mm_s_to_um_s(r.vx), units::mm_s_to_um_s(r.vy)))
                    .collect(),
            ),
        }
    }

    /// Positions only; supports linear interpolation.
    pub fn from_points(track_id: u64, points: Vec<Vector2<f64>>, frame_rate: f64) -> Self {
        TrackPath {
            track_id,
            dt: 1.0 / frame_rate,
            points,
            velocities: None,
        }
    }
}

/// Acceleration (mm/s²) that takes `p1` (µm) with velocity `v1` (mm/s) to
/// `p2` exactly in `dt_frame` seconds.
pub fn segment_accel(
    p1: Vector2<f64>,
    v1_mm_s: Vector2<f64>,
    p2: Vector2<f64>,
    dt_frame: f64,
) -> Vector2<f64> {
    let v1 = v1_mm_s.map(units::mm_s_to_um_s);
    let a_um = segment_accel_um(p1, v1, p2, dt_frame);
    a_um.map(units::um_s2_to_mm_s2)
}

/// Internal-unit variant (µm/s in, µm/s² out).
fn segment_accel_um(
    p1: Vector2<f64>,
    v1_um_s: Vector2<f64>,
    p2: Vector2<f64>,
    dt_frame: f64,
) -> Vector2<f64> {
    (p2 - p1 - v1_um_s * dt_frame) * (2.0 / (dt_frame * dt_frame))
}

/// Densifies a track so consecutive samples are at most `step_len_um` apart.
/// Segment endpoints are reproduced exactly in both methods.
pub fn interpolate(path: &TrackPath, method: InterpMethod, step_len_um: f64) -> Result<DenseTrack> {
    if path.points.len() < 2 {
        return Err(Error::Data(format!(
            "cannot interpolate a track of {} point(s)",
            path.points.len()
        )));
    }
    if step_len_um <= 0.0 || step_len_um.is_nan() {
        return Err(Error::Data(format!(
            "step length must be positive, got {step_len_um}"
        )));
    }
    let velocities = match method {
        InterpMethod::Accel => Some(path.velocities.as_ref().ok_or_else(|| {
            Error::Data("acceleration interpolation requires per-point velocities".into())
        })?),
        InterpMethod::Linear => None,
    };

    let dt = path.dt;
    let mut samples: Vec<DenseSample> = Vec::new();
    for (i, w) in path.points.windows(2).enumerate() {
        let (p1, p2) = (w[0], w[1]);
        let t0 = i as f64 * dt;
        let seg: Vec<DenseSample> = match method {
            InterpMethod::Linear => {
                let chord = (p2 - p1).norm();
                let n = ((chord / step_len_um).ceil() as usize).max(1);
                let speed = units::um_s_to_mm_s(chord / dt);
                (0..=n)
                    .map(|j| {
                        let frac = j as f64 / n as f64;
                        let p = if j == n { p2 } else { p1 + (p2 - p1) * frac };
                        DenseSample {
                            x: p.x,
                            y: p.y,
                            speed,
                            gradient: 0.0,
                            t: t0 + frac * dt,
                        }
                    })
                    .collect()
            }
            InterpMethod::Accel => {
                let v1 = velocities.expect("checked above")[i];
                let a = segment_accel_um(p1, v1, p2, dt);
                let peak_speed = v1.norm() + a.norm() * dt;
                let n = (((peak_speed * dt) / step_len_um).ceil() as usize).max(1);
                (0..=n)
                    .map(|j| {
                        let t = dt * j as f64 / n as f64;
                        let p = if j == n {
                            p2
                        } else {
                            p1 + v1 * t + a * (0.5 * t * t)
                        };
                        DenseSample {
                            x: p.x,
                            y: p.y,
                            speed: units::um_s_to_mm_s((v1 + a * t).norm()),
                            gradient: 0.0,
                            t: t0 + t,
                        }
                    })
                    .collect()
            }
        };
        let skip = usize::from(i > 0); // interior knots appear once
        samples.extend(seg.into_iter().skip(skip));
    }
    Ok(DenseTrack {
        track_id: path.track_id,
        samples,
    })
}

/// Fills the gradient field from consecutive speed differences; the last
/// sample copies its predecessor.
pub fn speed_gradient(mut dense: DenseTrack, basis: GradientBasis) -> DenseTrack {
    let n = dense.samples.len();
    if n < 2 {
        for s in &mut dense.samples {
            s.gradient = 0.0;
        }
        return dense;
    }
    for i in 0..n - 1 {
        let (a, b) = (dense.samples[i], dense.samples[i + 1]);
        let ds = b.speed - a.speed;
        let denom = match basis {
            GradientBasis::PerTime => b.t - a.t,
            GradientBasis::PerDistance => {
                (Vector2::new(b.x, b.y) - Vector2::new(a.x, a.y)).norm() / units::UM_PER_MM
            }
        };
        dense.samples[i].gradient = if denom > 0.0 { ds / denom } else { 0.0 };
    }
    dense.samples[n - 1].gradient = dense.samples[n - 2].gradient;
    dense
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn segment_accel_consistent_linear_motion() {
        // 1 mm/s covers 40 µm in 0.04 s: no residual acceleration.
        let a = segment_accel(
            Vector2::zeros(),
            Vector2::new(1.0, 0.0),
            Vector2::new(40.0, 0.0),
            0.04,
        );
        assert_abs_diff_eq!(a, Vector2::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn segment_accel_from_rest() {
        let a = segment_accel(
            Vector2::zeros(),
            Vector2::zeros(),
            Vector2::new(80.0, 0.0),
            0.04,
        );
        assert_relative_eq!(a.x, 100.0, max_relative = 1e-12);
        // Eq. 9 halfway: ½ · 100 mm/s² · (0.02 s)² = 20 µm.
        let x_mid = 0.5 * units::mm_s2_to_um_s2(a.x) * 0.02 * 0.02;
        assert_relative_eq!(x_mid, 20.0, max_relative = 1e-12);
    }

    #[test]
    fn linear_subdivision_counts_samples() {
        let path = TrackPath::from_points(0, vec![Vector2::zeros(), Vector2::new(10.0, 0.0)], 25.0);
        let dense = interpolate(&path, InterpMethod::Linear, 1.0).unwrap();
        assert_eq!(dense.samples.len(), 11);
        assert_eq!(dense.samples[0].x, 0.0);
        assert_eq!(dense.samples[10].x, 10.0);
    }

    #[test]
    fn too_short_track_errors() {
        let path = TrackPath::from_points(0, vec![Vector2::zeros()], 25.0);
        assert!(interpolate(&path, InterpMethod::Linear, 1.0).is_err());
    }

    #[test]
    fn accel_without_velocities_errors() {
        let path = TrackPath::from_points(0, vec![Vector2::zeros(), Vector2::new(5.0, 0.0)], 25.0);
        assert!(interpolate(&path, InterpMethod::Accel, 1.0).is_err());
    }

    #[test]
    fn degenerate_segment_no_nan() {
        let path = TrackPath {
            track_id: 0,
            dt: 0.04,
            points: vec![Vector2::new(5.0, 5.0), Vector2::new(5.0, 5.0)],
            velocities: Some(vec![Vector2::zeros(), Vector2::zeros()]),
        };
        let dense = interpolate(&path, InterpMethod::Accel, 1.0).unwrap();
        assert_eq!(dense.samples.len(), 2);
        for s in &dense.samples {
            assert!(s.x.is_finite() && s.y.is_finite() && s.speed == 0.0);
        }
        let g = speed_gradient(dense, GradientBasis::PerTime);
        assert!(g.samples.iter().all(|s| s.gradient == 0.0));
    }

    /// Quadratic ground truth: the acceleration method follows the curve,
    /// the linear method cuts the corner.
    #[test]
    fn accel_beats_linear_on_quadratic_truth() {
        let dt = 0.04;
        let a_true = Vector2::new(0.0, 60_000.0); // µm/s²
        let v0 = Vector2::new(4_000.0, -3_000.0); // µm/s
        let truth = |t: f64| v0 * t + a_true * (0.5 * t * t);
        let n_pts = 6;
        let points: Vec<_> = (0..n_pts).map(|i| truth(i as f64 * dt)).collect();
        let velocities: Vec<_> = (0..n_pts).map(|i| v0 + a_true * (i as f64 * dt)).collect();
        let path = TrackPath {
            track_id: 1,
            dt,
            points: points.clone(),
            velocities: Some(velocities),
        };
        let max_dev = |dense: &DenseTrack| -> f64 {
            dense
                .samples
                .iter()
                .map(|s| {
                    let p = truth(s.t);
                    (Vector2::new(s.x, s.y) - p).norm()
                })
                .fold(0.0, f64::max)
        };
        let lin = interpolate(&path, InterpMethod::Linear, 2.0).unwrap();
        let acc = interpolate(&path, InterpMethod::Accel, 2.0).unwrap();
        let (dev_lin, dev_acc) = (max_dev(&lin), max_dev(&acc));
        assert!(dev_acc < dev_lin, "accel {dev_acc} vs linear {dev_lin}");
        // Exact velocities on an exact quadratic reproduce the curve.
        assert!(dev_acc < 1e-9, "residual deviation {dev_acc}");
    }

    #[test]
    fn zero_acceleration_degenerates_to_linear() {
        let dt = 0.04;
        let v = Vector2::new(2500.0, 1000.0);
        let points: Vec<_> = (0..4).map(|i| v * (i as f64 * dt)).collect();
        let velocities = vec![v; 4];
        let path = TrackPath {
            track_id: 2,
            dt,
            points: points.clone(),
            velocities: Some(velocities),
        };
        let lin = interpolate(&path, InterpMethod::Linear, 5.0).unwrap();
        let acc = interpolate(&path, InterpMethod::Accel, 5.0).unwrap();
        assert_eq!(lin.samples.len(), acc.samples.len());
        for (l, a) in lin.samples.iter().zip(&acc.samples) {
            assert_abs_diff_eq!(l.x, a.x, epsilon = 1e-12);
            assert_abs_diff_eq!(l.y, a.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn endpoints_reproduced_exactly() {
        let dt = 0.04;
        let points = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(103.7, -44.1),
            Vector2::new(260.9, -12.3),
        ];
        let velocities = vec![
            Vector2::new(2000.0, -900.0),
            Vector2::new(3100.0, 400.0),
            Vector2::new(3900.0, 900.0),
        ];
        let path = TrackPath {
            track_id: 3,
            dt,
            points: points.clone(),
            velocities: Some(velocities),
        };
        for method in [InterpMethod::Linear, InterpMethod::Accel] {
            let dense = interpolate(&path, method, 3.0).unwrap();
            for p in &points {
                assert!(
                    dense.samples.iter().any(|s| s.x == p.x && s.y == p.y),
                    "endpoint {p:?} missing"
                );
            }
            // Max spacing respected.
            for w in dense.samples.windows(2) {
                let d = (Vector2::new(w[1].x, w[1].y) - Vector2::new(w[0].x, w[0].y)).norm();
                assert!(d <= 3.0 + 1e-9);
            }
        }
    }

    #[test]
    fn gradient_constant_speed_is_zero() {
        let path = TrackPath::from_points(
            0,
            vec![
                Vector2::zeros(),
                Vector2::new(100.0, 0.0),
                Vector2::new(200.0, 0.0),
            ],
            25.0,
        );
        let dense = interpolate(&path, InterpMethod::Linear, 5.0).unwrap();
        let g = speed_gradient(dense, GradientBasis::PerTime);
        assert!(g.samples.iter().all(|s| s.gradient.abs() < 1e-9));
    }

    #[test]
    fn gradient_linear_ramp() {
        // Speed ramping 1 → 2 mm/s over 1 s: gradient ≈ 1 mm/s² everywhere.
        let samples: Vec<DenseSample> = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                DenseSample {
                    x: 0.0,
                    y: 0.0,
                    speed: 1.0 + t,
                    gradient: 0.0,
                    t,
                }
            })
            .collect();
        let g = speed_gradient(
            DenseTrack {
                track_id: 0,
                samples,
            },
            GradientBasis::PerTime,
        );
        for s in &g.samples {
            assert_relative_eq!(s.gradient, 1.0, max_relative = 1e-9);
        }
    }
}
