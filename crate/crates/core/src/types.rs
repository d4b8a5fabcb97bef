//! Shared domain types: localisations, frame sequences, link sets and the
//! tracker configuration.

use std::collections::BTreeSet;

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// One detected point: frame index plus 2D position in micrometres.
///
/// `gt_id` carries the simulator-assigned bubble identity and is absent for
/// real data.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub frame: usize,
    /// µm
    pub x: f64,
    /// µm
    pub y: f64,
    pub gt_id: Option<u64>,
}

impl Localization {
    pub fn new(frame: usize, x: f64, y: f64) -> Self {
        Localization {
            frame,
            x,
            y,
            gt_id: None,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// An ordered sequence of per-frame localisation lists acquired at a fixed
/// frame rate. Frames are densely indexed from 0; empty frames are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeq {
    /// Hz
    pub frame_rate: f64,
    pub frames: Vec<Vec<Localization>>,
}

impl FrameSeq {
    pub fn new(frame_rate: f64) -> Result<Self> {
        if frame_rate <= 0.0 || frame_rate.is_nan() {
            return Err(Error::Data(format!(
                "frame rate must be positive, got {frame_rate}"
            )));
        }
        Ok(FrameSeq {
            frame_rate,
            frames: Vec::new(),
        })
    }

    /// Constant inter-frame interval in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_localizations(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Appends a localisation, growing the frame list as needed.
    pub fn push(&mut self, loc: Localization) {
        if loc.frame >= self.frames.len() {
            self.frames.resize(loc.frame + 1, Vec::new());
        }
        self.frames[loc.frame].push(loc);
    }

    pub fn get(&self, frame: usize, index: usize) -> Option<&Localization> {
        self.frames.get(frame).and_then(|f| f.get(index))
    }
}

/// A pairing of localisation `a` in `frame` with localisation `b` in
/// `frame + 1`, asserting both are the same bubble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub frame: usize,
    pub a: usize,
    pub b: usize,
}

impl Link {
    pub fn new(frame: usize, a: usize, b: usize) -> Self {
        Link { frame, a, b }
    }
}

/// Origin of a link set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSource {
    GroundTruth,
    Tracker,
}

/// A set of frame-to-frame pairings. Per frame boundary the pairing is
/// one-to-one: no localisation appears in more than one link per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub links: BTreeSet<Link>,
    pub source: LinkSource,
}

impl LinkSet {
    pub fn new(source: LinkSource) -> Self {
        LinkSet {
            links: BTreeSet::new(),
            source,
        }
    }

    /// Inserts a link, rejecting topology violations (an endpoint already
    /// used in the same direction at this frame boundary).
    pub fn insert(&mut self, link: Link) -> Result<()> {
        let clash = self
            .links
            .range(Link::new(link.frame, 0, 0)..Link::new(link.frame + 1, 0, 0))
            .any(|l| l.a == link.a || l.b == link.b);
        if clash {
            return Err(Error::Data(format!(
                "topology violation: frame {} already links a={} or b={}",
                link.frame, link.a, link.b
            )));
        }
        self.links.insert(link);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, link: &Link) -> bool {
        self.links.contains(link)
    }
}

/// Splits a sequence into `k` temporally interleaved subgroups: subgroup `j`
/// holds frames `j, j+k, j+2k, …` reindexed densely, at `frame_rate / k`.
/// The union of the subgroups is the original sequence.
pub fn downsample(seq: &FrameSeq, k: usize) -> Result<Vec<FrameSeq>> {
    if k < 2 {
        return Err(Error::Config(format!(
            "downsampling factor must be at least 2, got {k}"
        )));
    }
    if k >= seq.n_frames() {
        return Err(Error::Data(format!(
            "downsampling factor {k} must be below the frame count {}",
            seq.n_frames()
        )));
    }
    let mut subs = Vec::with_capacity(k);
    for j in 0..k {
        let mut sub = FrameSeq::new(seq.frame_rate / k as f64)?;
        for (new_frame, frame) in (j..seq.n_frames()).step_by(k).enumerate() {
            sub.frames.push(
                seq.frames[frame]
                    .iter()
                    .map(|loc| Localization {
                        frame: new_frame,
                        ..loc.clone()
                    })
                    .collect(),
            );
        }
        subs.push(sub);
    }
    Ok(subs)
}

/// How a new track's acceleration (and the matching velocity) is derived
/// from the initialising triple of localisations.
///
/// `CentralDiff` keeps the central-difference estimates at the middle frame
/// (velocity `(L12+L23)/2Δt`, acceleration `(L23−L12)/2Δt`); `Kinematic`
/// uses `(L23−L12)/Δt²` and advances the velocity to the third frame, which
/// makes a one-step prediction exact on constant-acceleration motion. See
/// [`crate::tracker::init_state`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AInitMode {
    CentralDiff,
    #[default]
    Kinematic,
}

/// Tracker tuning. All fields positive; units follow the global policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Process-noise (acceleration) std, mm/s².
    pub sigma_a: f64,
    /// Observation-noise std, µm.
    pub r_std: f64,
    /// Gating speed, mm/s: candidate links longer than `v_max / frame_rate`
    /// are excluded.
    pub v_max: f64,
    /// Ceiling on the unitless 3-frame initialisation cost (range [0, 2]).
    pub init_cost_max: f64,
    /// Tracks shorter than this many points are discarded from the output.
    pub min_track_len: usize,
    pub a_init_mode: AInitMode,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            sigma_a: 20.0,
            r_std: 20.0,
            v_max: 20.0,
            init_cost_max: 0.8,
            min_track_len: 3,
            a_init_mode: AInitMode::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_a", self.sigma_a),
            ("r_std", self.r_std),
            ("v_max", self.v_max),
            ("init_cost_max", self.init_cost_max),
        ];
        for (name, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "tracker.{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.min_track_len < 2 {
            return Err(Error::Config(format!(
                "tracker.min_track_len must be at least 2, got {}",
                self.min_track_len
            )));
        }
        Ok(())
    }

    /// Gate radius in µm for one frame interval.
    pub fn gate_um(&self, frame_rate: f64) -> f64 {
        crate::units::mm_s_to_um_s(self.v_max) / frame_rate
    }
}
