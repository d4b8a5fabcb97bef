//! Seeded vessel-geometry presets: a branching phantom for the tracking
//! experiments and single curved vessels of increasing tortuosity for the
//! interpolation experiments.
//!
//! Control points come from a bounded-curvature random walk so every preset
//! is reproducible from its seed.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::VesselSpec;

/// Labels for the simulated bubble concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concentration {
    Low,
    Mid,
    High,
}

impl Concentration {
    /// Concurrent bubbles in view for this preset.
    pub fn n_concurrent(self) -> usize {
        match self {
            Concentration::Low => 10,
            Concentration::Mid => 15,
            Concentration::High => 25,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(Concentration::Low),
            "mid" => Some(Concentration::Mid),
            "high" => Some(Concentration::High),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Concentration::Low => "low",
            Concentration::Mid => "mid",
            Concentration::High => "high",
        }
    }
}

/// Bounded-curvature random walk: control points spaced `step` µm with the
/// heading perturbed by N(0, turn_std) clamped to ±max_turn per step.
fn walk(
    rng: &mut ChaCha8Rng,
    start: Vector2<f64>,
    heading0: f64,
    step: f64,
    n_steps: usize,
    turn_std_deg: f64,
    max_turn_deg: f64,
) -> Vec<Vector2<f64>> {
    let turn = Normal::new(0.0, turn_std_deg.to_radians()).expect("positive std");
    let max_turn = max_turn_deg.to_radians();
    let mut heading = heading0;
    let mut p = start;
    let mut pts = vec![p];
    for _ in 0..n_steps {
        heading += turn.sample(rng).clamp(-max_turn, max_turn);
        p += Vector2::new(heading.cos(), heading.sin()) * step;
        pts.push(p);
    }
    pts
}

/// The tracking phantom: two main vessels, each branching into three
/// downstream vessels. The mains converge toward a shared band so the two
/// fans of children interleave and cross.
pub fn branching_phantom(seed: u64) -> Vec<VesselSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
    let mut mains = Vec::new();
    for (y0, drift) in [(900.0, 0.5), (3_100.0, -0.5)] {
        let start = Vector2::new(250.0, y0 + rng.gen_range(-120.0..120.0));
        let control = walk(&mut rng, start, drift, 380.0, 3, 8.0, 20.0);
        let end = *control.last().expect("non-empty walk");
        let end_heading = {
            let d = end - control[control.len() - 2];
            d.y.atan2(d.x)
        };
        let mut children = Vec::new();
        for fan in [-0.85, -0.1, 0.65] {
            let heading = end_heading + fan + rng.gen_range(-0.08..0.08);
            let mut child_control = walk(&mut rng, end, heading, 320.0, 5, 16.0, 35.0);
            child_control[0] = end; // exact branch attachment
            children.push(VesselSpec::new(child_control));
        }
        mains.push(VesselSpec::new(control).with_children(children));
    }
    mains
}

/// One single curved vessel; `level` 0..=5 increases tortuosity.
///
/// The centerline meanders with continuously varying curvature (no straight
/// stretches): the heading turns at a rate that oscillates along the arc,
/// with the peak curvature radius shrinking from ~700 µm (level 0) to
/// ~220 µm (level 5).
pub fn curved_vessel(seed: u64, level: usize) -> VesselSpec {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x85EB_CA6B).wrapping_add(level as u64));
    let radius = 700.0 - 96.0 * level as f64;
    let kappa0 = 1.0 / radius;
    let wavelength = 2_400.0 - 200.0 * level as f64;
    let jitter = Normal::new(0.0, 0.15 * kappa0).expect("positive std");
    let step = 150.0;
    let n_steps = 26;
    let phase0 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut heading = rng.gen_range(-0.4..0.4);
    let mut p = Vector2::new(400.0, 2_500.0);
    let mut pts = vec![p];
    for i in 0..n_steps {
        let arc = i as f64 * step;
        let kappa = kappa0 * (std::f64::consts::TAU * arc / wavelength + phase0).sin()
            + jitter.sample(&mut rng);
        heading += kappa * step;
        p += Vector2::new(heading.cos(), heading.sin()) * step;
        pts.push(p);
    }
    VesselSpec::new(pts)
}

/// The six single-vessel interpolation datasets.
pub fn interp_suite(seed: u64) -> Vec<VesselSpec> {
    (0..6).map(|level| curved_vessel(seed, level)).collect()
}
