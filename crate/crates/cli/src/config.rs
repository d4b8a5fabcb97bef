//! TOML configuration: one `[section]` per pipeline stage, all fields
//! optional with the library defaults. CLI flags override file values.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use ulmtrack_core::interp::{GradientBasis, InterpMethod};
use ulmtrack_core::simulate::presets;
use ulmtrack_core::simulate::presets::Concentration;
use ulmtrack_core::simulate::{FlowSpec, SimConfig, VesselSpec};
use ulmtrack_core::tracker::TrackerMode;
use ulmtrack_core::types::AInitMode;
use ulmtrack_core::TrackerConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub interp: InterpSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub sigma_a: Option<f64>,
    pub r_std: Option<f64>,
    pub v_max: Option<f64>,
    pub init_cost_max: Option<f64>,
    pub min_track_len: Option<usize>,
    pub a_init_mode: Option<String>,
}

impl TrackerSection {
    pub fn build(&self) -> Result<TrackerConfig> {
        let base = TrackerConfig::default();
        let a_init_mode = match self.a_init_mode.as_deref() {
            None => base.a_init_mode,
            Some("kinematic") => AInitMode::Kinematic,
            Some("central-diff") => AInitMode::CentralDiff,
            Some(other) => bail!(
                "tracker.a_init_mode must be \"kinematic\" or \"central-diff\", got {other:?}"
            ),
        };
        Ok(TrackerConfig {
            sigma_a: self.sigma_a.unwrap_or(base.sigma_a),
            r_std: self.r_std.unwrap_or(base.r_std),
            v_max: self.v_max.unwrap_or(base.v_max),
            init_cost_max: self.init_cost_max.unwrap_or(base.init_cost_max),
            min_track_len: self.min_track_len.unwrap_or(base.min_track_len),
            a_init_mode,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub frame_rate: Option<f64>,
    pub duration: Option<f64>,
    pub concentration: Option<String>,
    pub n_concurrent: Option<usize>,
    pub loc_noise_std: Option<f64>,
    pub preset: Option<String>,
}

impl SimulateSection {
    pub fn build(&self, seed: u64, frame_rate_flag: Option<f64>) -> Result<SimConfig> {
        let base = SimConfig::default();
        let n_concurrent = match (&self.n_concurrent, &self.concentration) {
            (Some(n), _) => *n,
            (None, Some(c)) => parse_concentration(c)?.n_concurrent(),
            (None, None) => base.n_concurrent,
        };
        Ok(SimConfig {
            frame_rate: frame_rate_flag
                .or(self.frame_rate)
                .unwrap_or(base.frame_rate),
            duration: self.duration.unwrap_or(base.duration),
            n_concurrent,
            loc_noise_std: self.loc_noise_std.unwrap_or(base.loc_noise_std),
            seed,
        })
    }

    pub fn vessels(&self, seed: u64) -> Result<Vec<VesselSpec>> {
        build_preset(self.preset.as_deref().unwrap_or("branching"), seed)
    }
}

pub fn parse_concentration(label: &str) -> Result<Concentration> {
    Concentration::parse(label)
        .with_context(|| format!("concentration must be low/mid/high, got {label:?}"))
}

/// `branching` or `curved-<level>` with level 0..=5.
pub fn build_preset(name: &str, seed: u64) -> Result<Vec<VesselSpec>> {
    if name == "branching" {
        return Ok(presets::branching_phantom(seed));
    }
    if let Some(level) = name.strip_prefix("curved-") {
        let level: usize = level
            .parse()
            .with_context(|| format!("invalid curved vessel level in preset {name:?}"))?;
        if level > 5 {
            bail!("curved vessel level must be 0..=5, got {level}");
        }
        return Ok(vec![presets::curved_vessel(seed, level)]);
    }
    bail!("unknown preset {name:?} (expected \"branching\" or \"curved-<0..5>\")")
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub s0: Option<f64>,
    pub a_peak: Option<f64>,
    pub heart_rate: Option<f64>,
    pub s_min: Option<f64>,
}

impl FlowSection {
    pub fn build(&self, a_peak_override: Option<f64>) -> FlowSpec {
        let base = FlowSpec::default();
        FlowSpec {
            s0: self.s0.unwrap_or(base.s0),
            a_peak: a_peak_override.or(self.a_peak).unwrap_or(base.a_peak),
            heart_rate: self.heart_rate.unwrap_or(base.heart_rate),
            s_min: self.s_min.unwrap_or(base.s_min),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpSection {
    pub method: Option<String>,
    pub step_len: Option<f64>,
    pub gradient_basis: Option<String>,
}

impl InterpSection {
    pub fn method(&self, flag: Option<&str>) -> Result<InterpMethod> {
        match flag.or(self.method.as_deref()).unwrap_or("accel") {
            "accel" => Ok(InterpMethod::Accel),
            "linear" => Ok(InterpMethod::Linear),
            other => bail!("interpolation method must be \"accel\" or \"linear\", got {other:?}"),
        }
    }

    pub fn step_len(&self) -> f64 {
        self.step_len
            .unwrap_or(ulmtrack_core::render::DEFAULT_PIXEL_UM)
    }

    pub fn gradient_basis(&self) -> Result<GradientBasis> {
        match self.gradient_basis.as_deref() {
            None | Some("per-time") => Ok(GradientBasis::PerTime),
            Some("per-distance") => Ok(GradientBasis::PerDistance),
            Some(other) => {
                bail!(
                    "interp.gradient_basis must be \"per-time\" or \"per-distance\", got {other:?}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub pixel: Option<f64>,
}

impl RenderSection {
    pub fn pixel(&self) -> f64 {
        self.pixel
            .unwrap_or(ulmtrack_core::render::DEFAULT_PIXEL_UM)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub frame_rates: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub concentrations: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub maps: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            frame_rates: vec![15.0, 25.0, 35.0],
            accelerations: vec![0.0, 37.5, 75.0, 112.5],
            concentrations: vec!["low".into(), "mid".into(), "high".into()],
            seeds: Vec::new(),
            maps: false,
        }
    }
}

pub fn parse_tracker_mode(s: &str) -> Result<TrackerMode> {
    match s {
        "accel" => Ok(TrackerMode::Accel),
        "const-vel" => Ok(TrackerMode::ConstVel),
        other => bail!("mode must be \"accel\" or \"const-vel\", got {other:?}"),
    }
}

pub fn mode_label(mode: TrackerMode) -> &'static str {
    match mode {
        TrackerMode::Accel => "accel",
        TrackerMode::ConstVel => "const_vel",
    }
}
