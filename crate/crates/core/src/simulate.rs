//! Ground-truth generator: branching/curved vessel geometry, pulsatile
//! along-centerline bubble kinematics, frame sampling with optional
//! localisation noise, and ground-truth link emission.

pub mod presets;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{FrameSeq, Link, LinkSet, LinkSource, Localization};
use crate::units;

/// Spacing of the emitted dense centerline, µm. Keeps nearest-point distance
/// from any on-vessel position below 0.2 µm.
pub const CENTERLINE_STEP_UM: f64 = 0.35;

/// Kinematic integration substep ceiling, s (1 kHz).
pub const SUBSTEP_S: f64 = 1e-3;

/// A vessel: a smooth centerline through control points (µm), with child
/// vessels branching at its end point.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselSpec {
    pub control: Vec<Vector2<f64>>,
    pub children: Vec<VesselSpec>,
}

impl VesselSpec {
    pub fn new(control: Vec<Vector2<f64>>) -> Self {
        VesselSpec {
            control,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<VesselSpec>) -> Self {
        self.children = children;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.control.len() < 2 {
            return Err(Error::Config(
                "vessel needs at least two control points".into(),
            ));
        }
        for w in self.control.windows(2) {
            if (w[1] - w[0]).norm() == 0.0 {
                return Err(Error::Config(
                    "consecutive vessel control points must be distinct".into(),
                ));
            }
        }
        let end = *self.control.last().expect("validated non-empty");
        for child in &self.children {
            child.validate()?;
            let start = child.control[0];
            if (start - end).norm() > 1e-6 {
                return Err(Error::Config(format!(
                    "child vessel must start at the parent end point ({end:?} vs {start:?})"
                )));
            }
        }
        Ok(())
    }
}

/// Pulsatile along-track flow parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// Mean speed, mm/s.
    pub s0: f64,
    /// Peak along-track acceleration, mm/s².
    pub a_peak: f64,
    /// Beats per minute.
    pub heart_rate: f64,
    /// Clamping floor, mm/s.
    pub s_min: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            s0: 3.0,
            a_peak: 75.0,
            heart_rate: 75.0,
            s_min: 0.1,
        }
    }
}

impl FlowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s0 <= 0.0 || self.s0.is_nan() {
            return Err(Error::Config(format!(
                "flow.s0 must be positive: {}",
                self.s0
            )));
        }
        if self.a_peak < 0.0 {
            return Err(Error::Config(format!(
                "flow.a_peak must be non-negative: {}",
                self.a_peak
            )));
        }
        if self.heart_rate <= 0.0 || self.heart_rate.is_nan() {
            return Err(Error::Config(format!(
                "flow.heart_rate must be positive: {}",
                self.heart_rate
            )));
        }
        if self.s_min < 0.0 {
            return Err(Error::Config(format!(
                "flow.s_min must be non-negative: {}",
                self.s_min
            )));
        }
        Ok(())
    }

    /// Waveform frequency, Hz.
    pub fn frequency(&self) -> f64 {
        self.heart_rate / 60.0
    }

    /// Sinusoid amplitude (mm/s) whose peak time-derivative equals `a_peak`.
    pub fn amplitude(&self) -> f64 {
        if self.a_peak == 0.0 {
            0.0
        } else {
            self.a_peak / (std::f64::consts::TAU * self.frequency())
        }
    }
}

/// Simulation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub frame_rate: f64,
    /// s
    pub duration: f64,
    /// Bubbles kept concurrently in view (concentration proxy).
    pub n_concurrent: usize,
    /// Isotropic localisation noise std, µm.
    pub loc_noise_std: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frame_rate: 25.0,
            duration: 30.0,
            n_concurrent: 15,
            loc_noise_std: 2.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_rate <= 0.0 || self.frame_rate.is_nan() {
            return Err(Error::Config(format!(
                "simulate.frame_rate must be positive: {}",
                self.frame_rate
            )));
        }
        if self.duration <= 0.0 || self.duration.is_nan() {
            return Err(Error::Config(format!(
                "simulate.duration must be positive: {}",
                self.duration
            )));
        }
        if self.n_concurrent == 0 {
            return Err(Error::Config(
                "simulate.n_concurrent must be positive".into(),
            ));
        }
        if self.loc_noise_std < 0.0 {
            return Err(Error::Config(format!(
                "simulate.loc_noise_std must be non-negative: {}",
                self.loc_noise_std
            )));
        }
        Ok(())
    }
}

/// Pulsatile speed at time `t` (mm/s):
/// `max(s_min, s0 + A·sin(2π·f·t))` with `A = a_peak / (2π·f)`.
pub fn speed_waveform(t: f64, flow: &FlowSpec) -> f64 {
    let raw = flow.s0 + flow.amplitude() * (std::f64::consts::TAU * flow.frequency() * t).sin();
    raw.max(flow.s_min)
}

/// Arc length (µm) travelled between `t0` and `t1` under the waveform with
/// the given phase offset, trapezoid-integrated at substeps of at most
/// [`SUBSTEP_S`].
pub fn advance_arc(flow: &FlowSpec, phase: f64, t0: f64, t1: f64) -> f64 {
    let span = t1 - t0;
    if span <= 0.0 {
        return 0.0;
    }
    let n = ((span / SUBSTEP_S).ceil() as usize).max(1);
    let h = span / n as f64;
    let mut arc_mm = 0.0;
    let mut prev = speed_waveform(t0 + phase, flow);
    for j in 1..=n {
        let cur = speed_waveform(t0 + phase + h * j as f64, flow);
        arc_mm += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    units::mm_s_to_um_s(arc_mm) // mm → µm, time already integrated out
}

// ---------------------------------------------------------------------------
// Centerline geometry
// ---------------------------------------------------------------------------

/// An arc-length-parameterised polyline sampled densely from a Catmull-Rom
/// curve through the control points.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pts: Vec<Vector2<f64>>,
    cum: Vec<f64>,
}

impl SampledCurve {
    pub fn from_control(control: &[Vector2<f64>]) -> Self {
        let n = control.len();
        debug_assert!(n >= 2);
        let mut pts = vec![control[0]];
        for i in 0..n - 1 {
            let p0 = control[i.saturating_sub(1)];
            let p1 = control[i];
            let p2 = control[i + 1];
            let p3 = control[(i + 2).min(n - 1)];
            let est = (p2 - p1).norm();
            let steps = ((est / 0.75).ceil() as usize).clamp(8, 4096);
            for j in 1..=steps {
                pts.push(catmull_rom(p0, p1, p2, p3, j as f64 / steps as f64));
            }
        }
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            acc += (w[1] - w[0]).norm();
            cum.push(acc);
        }
        SampledCurve { pts, cum }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().expect("non-empty")
    }

    /// Position at arc length `s` (clamped to the curve).
    pub fn position(&self, s: f64) -> Vector2<f64> {
        let s = s.clamp(0.0, self.length());
        let i = self.cum.partition_point(|&c| c < s).min(self.cum.len() - 1);
        if i == 0 {
            return self.pts[0];
        }
        let (c0, c1) = (self.cum[i - 1], self.cum[i]);
        let span = c1 - c0;
        let frac = if span > 0.0 { (s - c0) / span } else { 0.0 };
        self.pts[i - 1] + (self.pts[i] - self.pts[i - 1]) * frac
    }

    /// Resamples at fixed arc steps, always including the final point.
    pub fn resample(&self, step: f64) -> Vec<Vector2<f64>> {
        let len = self.length();
        let n = (len / step).floor() as usize;
        let mut out: Vec<Vector2<f64>> = (0..=n).map(|i| self.position(i as f64 * step)).collect();
        let last = self.position(len);
        if (out.last().copied().unwrap() - last).norm() > 1e-12 {
            out.push(last);
        }
        out
    }
}

fn catmull_rom(
    p0: Vector2<f64>,
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    p3: Vector2<f64>,
    t: f64,
) -> Vector2<f64> {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0
        + (p2 - p0) * t
        + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
        + ((p1 - p2) * 3.0 - p0 + p3) * t3)
        * 0.5
}

struct VesselNode {
    curve: SampledCurve,
    children: Vec<usize>,
}

struct VesselArena {
    nodes: Vec<VesselNode>,
    roots: Vec<usize>,
}

fn build_arena(vessels: &[VesselSpec]) -> VesselArena {
    fn add(nodes: &mut Vec<VesselNode>, spec: &VesselSpec) -> usize {
        let curve = SampledCurve::from_control(&spec.control);
        let idx = nodes.len();
        nodes.push(VesselNode {
            curve,
            children: Vec::new(),
        });
        for child in &spec.children {
            let c = add(nodes, child);
            nodes[idx].children.push(c);
        }
        idx
    }
    let mut nodes = Vec::new();
    let roots = vessels.iter().map(|v| add(&mut nodes, v)).collect();
    VesselArena { nodes, roots }
}

impl VesselArena {
    /// Walks from a root, choosing a uniformly random child at each branch.
    fn sample_path(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
        let mut node = self.roots[rng.gen_range(0..self.roots.len())];
        let mut path = vec![node];
        let mut total = self.nodes[node].curve.length();
        while !self.nodes[node].children.is_empty() {
            let kids = &self.nodes[node].children;
            node = kids[rng.gen_range(0..kids.len())];
            path.push(node);
            total += self.nodes[node].curve.length();
        }
        (path, total)
    }

    fn position_on_path(&self, path: &[usize], mut s: f64) -> Vector2<f64> {
        for (i, &node) in path.iter().enumerate() {
            let len = self.nodes[node].curve.length();
            if s <= len || i == path.len() - 1 {
                return self.nodes[node].curve.position(s);
            }
            s -= len;
        }
        unreachable!("path is non-empty")
    }
}

// ---------------------------------------------------------------------------
// Simulation proper
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub seq: FrameSeq,
    pub gt: LinkSet,
    /// Dense on-centerline points of every vessel, µm.
    pub centerline: Vec<Vector2<f64>>,
}

struct Bubble {
    id: u64,
    path: Vec<usize>,
    total_len: f64,
    arc: f64,
    phase: f64,
}

/// Runs the simulator: `n_concurrent` bubbles advance along vessel
/// centerlines under the pulsatile waveform (each with its own phase
/// offset), are replaced at a vessel inlet on exit, and are localised per
/// frame with isotropic Gaussian noise. Deterministic for a fixed seed.
pub fn simulate(vessels: &[VesselSpec], flow: &FlowSpec, cfg: &SimConfig) -> Result<SimOutput> {
    if vessels.is_empty() {
        return Err(Error::Config("at least one vessel is required".into()));
    }
    for v in vessels {
        v.validate()?;
    }
    flow.validate()?;
    cfg.validate()?;

    let arena = build_arena(vessels);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let period = 1.0 / flow.frequency();
    let noise = if cfg.loc_noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.loc_noise_std).expect("std validated"))
    } else {
        None
    };

    // Steady-state start: bubbles begin at random arc positions so frame 0
    // is not a stack of points at the inlets.
    let mut next_id = 0u64;
    let mut bubbles: Vec<Bubble> = (0..cfg.n_concurrent)
        .map(|_| {
            let (path, total_len) = arena.sample_path(&mut rng);
            let arc = rng.gen_range(0.0..total_len);
            let phase = rng.gen_range(0.0..period);
            let id = next_id;
            next_id += 1;
            Bubble {
                id,
                path,
                total_len,
                arc,
                phase,
            }
        })
        .collect();

    let n_frames = (cfg.duration * cfg.frame_rate).round() as usize;
    let dt = 1.0 / cfg.frame_rate;
    let mut seq = FrameSeq::new(cfg.frame_rate)?;
    seq.frames = vec![Vec::new(); n_frames];
    let mut gt = LinkSet::new(LinkSource::GroundTruth);
    // id → index in the previous frame
    let mut prev_index: std::collections::BTreeMap<u64, usize> = Default::default();

    for k in 0..n_frames {
        if k > 0 {
            let (t0, t1) = ((k - 1) as f64 * dt, k as f64 * dt);
            let n_sub = (((t1 - t0) / SUBSTEP_S).ceil() as usize).max(1);
            let h = (t1 - t0) / n_sub as f64;
            for bubble in &mut bubbles {
                for j in 0..n_sub {
                    let ta = t0 + h * j as f64;
                    bubble.arc += advance_arc(flow, bubble.phase, ta, ta + h);
                    if bubble.arc >= bubble.total_len {
                        let (path, total_len) = arena.sample_path(&mut rng);
                        let phase = rng.gen_range(0.0..period);
                        let id = next_id;
                        next_id += 1;
                        *bubble = Bubble {
                            id,
                            path,
                            total_len,
                            arc: 0.0,
                            phase,
                        };
                    }
                }
            }
        }

        let mut cur_index: std::collections::BTreeMap<u64, usize> = Default::default();
        for b in &bubbles {
            let p = arena.position_on_path(&b.path, b.arc);
            let (nx, ny) = match &noise {
                Some(dist) => (dist.sample(&mut rng), dist.sample(&mut rng)),
                None => (0.0, 0.0),
            };
            let index = seq.frames[k].len();
            seq.frames[k].push(Localization {
                frame: k,
                x: p.x + nx,
                y: p.y + ny,
                gt_id: Some(b.id),
            });
            cur_index.insert(b.id, index);
            if k > 0 {
                if let Some(&a) = prev_index.get(&b.id) {
                    gt.insert(Link::new(k - 1, a, index))?;
                }
            }
        }
        prev_index = cur_index;
    }

    let mut centerline = Vec::new();
    for node in &arena.nodes {
        centerline.extend(node.curve.resample(CENTERLINE_STEP_UM));
    }

    Ok(SimOutput {
        seq,
        gt,
        centerline,
    })
}
