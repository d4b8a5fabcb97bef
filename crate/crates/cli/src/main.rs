//! `ulmtrack`: simulate microvasculature datasets, track microbubbles, and
//! build super-resolved maps.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CmdResult;

#[derive(Parser)]
#[command(
    name = "ulmtrack",
    version,
    about = "Microbubble tracking toolkit: simulate, track, downsample, render, evaluate, sweep"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a simulated localisation dataset with ground-truth links.
    Simulate {
        /// RNG seed (also selects the preset geometry instance).
        #[arg(long)]
        seed: u64,
        /// TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Acquisition frame rate in Hz (overrides the config).
        #[arg(long = "frame-rate")]
        frame_rate: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a localisation CSV into tracks and links.
    Track {
        /// Localisation CSV.
        #[arg(long)]
        loc: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Motion model: "accel" (proposed) or "const-vel" (baseline).
        #[arg(long, default_value = "accel")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a localisation CSV into k temporally interleaved subgroups.
    Downsample {
        #[arg(long)]
        loc: PathBuf,
        /// Downsampling factor k (subgroup j keeps frames j, j+k, ...).
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolate stored tracks and accumulate density/speed/gradient maps.
    Render {
        /// Track CSV produced by `track`.
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Interpolation method: "accel" or "linear" (overrides the config).
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimated links against ground truth.
    Evaluate {
        /// Estimated link CSV.
        #[arg(long)]
        est: PathBuf,
        /// Ground-truth link CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Localisation CSV both link sets refer to.
        #[arg(long)]
        loc: PathBuf,
        /// Optional score CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment matrix: simulate, track both modes, score.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Single seed replacing the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker pool size (cells are independent).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also render per-cell maps.
        #[arg(long)]
        maps: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CmdResult {
    match cli.cmd {
        Cmd::Simulate {
            seed,
            config,
            frame_rate,
            out,
        } => commands::cmd_simulate(config, seed, frame_rate, out),
        Cmd::Track {
            loc,
            config,
            mode,
            out,
        } => commands::cmd_track(loc, config, &mode, out),
        Cmd::Downsample { loc, factor, out } => commands::cmd_downsample(loc, factor, out),
        Cmd::Render {
            tracks,
            config,
            method,
            out,
        } => commands::cmd_render(tracks, config, method, out),
        Cmd::Evaluate { est, gt, loc, out } => commands::cmd_evaluate(est, gt, loc, out),
        Cmd::Sweep {
            config,
            seed,
            jobs,
            maps,
            out,
        } => commands::cmd_sweep(config, seed, jobs, maps, out),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code);
        }
    }
}
