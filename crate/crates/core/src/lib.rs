//! Microbubble tracking for super-resolution ultrasound.
//!
//! The pipeline starts from per-frame point localisations and produces
//! tracks, densified trajectories and super-resolved maps:
//!
//! - [`kalman`]: constant-acceleration state estimation and the Gaussian
//!   pairing cost.
//! - [`assign`]: exact bipartite assignment with a non-assignment option and
//!   greedy 3-frame triplet selection.
//! - [`tracker`]: the frame loop gluing prediction, pairing and 3-frame
//!   track initialisation together.
//! - [`interp`]: linear and acceleration-based trajectory densification plus
//!   speed gradients.
//! - [`simulate`]: a pulsatile-flow microvasculature phantom with ground
//!   truth links.
//! - [`metrics`]: link-level scores, interpolation error, sweep summaries.
//! - [`render`]: density / speed / speed-gradient raster accumulation.
//! - [`io`]: the plain-CSV file formats shared by the CLI.

pub mod assign;
pub mod error;
pub mod interp;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod render;
pub mod simulate;
pub mod tracker;
pub mod types;
pub mod units;

pub use error::{Error, Result};
pub use types::{AInitMode, FrameSeq, Link, LinkSet, LinkSource, Localization, TrackerConfig};
