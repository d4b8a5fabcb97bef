//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use ulmtrack_core::interp::{interpolate, speed_gradient, DenseTrack, TrackPath};
use ulmtrack_core::io;
use ulmtrack_core::metrics::{self, score_links, GroupKey, ScoreRow, SummaryRow};
use ulmtrack_core::render::{FieldMaps, MapFormat, MapGeometry};
use ulmtrack_core::simulate::simulate;
use ulmtrack_core::tracker::{track, KalmanTrack, TrackerMode};
use ulmtrack_core::types::downsample;
use ulmtrack_core::TrackerConfig;

use crate::config::{self, Config};

/// Exit codes: 2 config error, 3 data error, 4 internal error.
#[derive(Debug)]
pub struct CodedError {
    pub code: i32,
    pub err: anyhow::Error,
}

impl std::fmt::Display for CodedError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.err)
    }
}

impl From<ulmtrack_core::Error> for CodedError {
    fn from(e: ulmtrack_core::Error) -> Self {
        let code = match &e {
            ulmtrack_core::Error::Config(_) => 2,
            ulmtrack_core::Error::DegenerateCovariance { .. } => 4,
            _ => 3,
        };
        CodedError {
            code,
            err: e.into(),
        }
    }
}

pub trait Coded<T> {
    fn code(self, code: i32) -> Result<T, CodedError>;
}

impl<T, E: Into<anyhow::Error>> Coded<T> for Result<T, E> {
    fn code(self, code: i32) -> Result<T, CodedError> {
        self.map_err(|e| CodedError {
            code,
            err: e.into(),
        })
    }
}

pub type CmdResult = Result<(), CodedError>;

fn ensure_dir(dir: &Path) -> Result<(), CodedError> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .code(3)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(
    config: Option<PathBuf>,
    seed: u64,
    frame_rate: Option<f64>,
    out: PathBuf,
) -> CmdResult {
    let cfg = Config::load(config.as_deref()).code(2)?;
    let vessels = cfg.simulate.vessels(seed).code(2)?;
    let sim_cfg = cfg.simulate.build(seed, frame_rate).code(2)?;
    let flow = cfg.flow.build(None);
    let output = simulate(&vessels, &flow, &sim_cfg)?;
    ensure_dir(&out)?;
    io::write_localizations(&output.seq, out.join("loc.csv"))?;
    io::write_links(&output.gt, out.join("links_gt.csv"))?;
    io::write_centerline(&output.centerline, out.join("centerline.csv"))?;
    println!(
        "simulated {} frames at {} Hz, {} localisations, {} ground-truth links -> {}",
        output.seq.n_frames(),
        output.seq.frame_rate,
        output.seq.n_localizations(),
        output.gt.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

pub fn cmd_track(loc: PathBuf, config: Option<PathBuf>, mode: &str, out: PathBuf) -> CmdResult {
    let cfg = Config::load(config.as_deref()).code(2)?;
    let tracker_cfg = cfg.tracker.build().code(2)?;
    let mode = config::parse_tracker_mode(mode).code(2)?;
    let seq = io::read_localizations(&loc)?;
    let (tracks, links) = track(&seq, &tracker_cfg, mode)?;
    ensure_dir(&out)?;
    let label = config::mode_label(mode);
    io::write_tracks(
        &tracks,
        seq.frame_rate,
        out.join(format!("tracks_{label}.csv")),
    )?;
    io::write_links(&links, out.join(format!("links_{label}.csv")))?;
    println!(
        "tracked {} localisations into {} tracks ({} links) -> {}",
        seq.n_localizations(),
        tracks.len(),
        links.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// downsample
// ---------------------------------------------------------------------------

pub fn cmd_downsample(loc: PathBuf, factor: usize, out: PathBuf) -> CmdResult {
    let seq = io::read_localizations(&loc)?;
    let subs = downsample(&seq, factor)?;
    ensure_dir(&out)?;
    for (j, sub) in subs.iter().enumerate() {
        io::write_localizations(sub, out.join(format!("loc_sub{j}.csv")))?;
    }
    println!(
        "split {} frames into {} subgroups at {} Hz -> {}",
        seq.n_frames(),
        factor,
        seq.frame_rate / factor as f64,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

/// Groups stored rows by track id, preserving frame order within each track.
fn paths_from_rows(rows: &[io::TrackRow], frame_rate: f64) -> Vec<TrackPath> {
    let mut by_id: std::collections::BTreeMap<u64, Vec<&io::TrackRow>> = Default::default();
    for r in rows {
        by_id.entry(r.track_id).or_default().push(r);
    }
    by_id
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.frame);
            TrackPath::from_rows(id, &rows, frame_rate)
        })
        .collect()
}

pub fn render_dense_tracks(
    rows: &[io::TrackRow],
    frame_rate: f64,
    cfg: &Config,
    method_flag: Option<&str>,
) -> Result<Vec<DenseTrack>, CodedError> {
    let method = cfg.interp.method(method_flag).code(2)?;
    let basis = cfg.interp.gradient_basis().code(2)?;
    let step = cfg.interp.step_len();
    let mut dense = Vec::new();
    for path in paths_from_rows(rows, frame_rate) {
        if path.points.len() < 2 {
            continue;
        }
        let d = interpolate(&path, method, step)?;
        dense.push(speed_gradient(d, basis));
    }
    Ok(dense)
}

pub fn write_maps(dense: &[DenseTrack], pixel: f64, out: &Path) -> Result<(), CodedError> {
    let geom = MapGeometry::fit(
        dense
            .iter()
            .flat_map(|t| t.samples.iter().map(|s| nalgebra::Vector2::new(s.x, s.y))),
        pixel,
    )?;
    let mut maps = FieldMaps::new(geom);
    for t in dense {
        maps.accumulate(t);
    }
    for (map, name) in [
        (&maps.density, "density"),
        (&maps.speed, "speed"),
        (&maps.gradient, "speed_gradient"),
    ] {
        let grid = map.snapshot();
        ulmtrack_core::render::write_map(&grid, out.join(format!("{name}.csv")), MapFormat::Csv)?;
        ulmtrack_core::render::write_map(&grid, out.join(format!("{name}.pgm")), MapFormat::Pgm16)?;
    }
    Ok(())
}

pub fn cmd_render(
    tracks: PathBuf,
    config: Option<PathBuf>,
    method: Option<String>,
    out: PathBuf,
) -> CmdResult {
    let cfg = Config::load(config.as_deref()).code(2)?;
    let (rows, frame_rate) = io::read_track_rows(&tracks)?;
    if rows.is_empty() {
        return Err(anyhow!("no track rows in {}", tracks.display())).code(3);
    }
    let dense = render_dense_tracks(&rows, frame_rate, &cfg, method.as_deref())?;
    ensure_dir(&out)?;
    io::write_dense_tracks(&dense, out.join("dense_tracks.csv"))?;
    write_maps(&dense, cfg.render.pixel(), &out)?;
    let n_samples: usize = dense.iter().map(|t| t.samples.len()).sum();
    println!(
        "rendered {} tracks ({} dense samples) -> {}",
        dense.len(),
        n_samples,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub fn cmd_evaluate(est: PathBuf, gt: PathBuf, loc: PathBuf, out: Option<PathBuf>) -> CmdResult {
    let est_links = io::read_links(&est)?;
    let gt_links = io::read_links(&gt)?;
    let seq = io::read_localizations(&loc)?;
    let score = score_links(&est_links, &gt_links, &seq)?;
    println!(
        "tp={} fp={} fn={} tpr={:.6} fnr={:.6} cpf={:.6}{}",
        score.true_positives,
        score.false_positives,
        score.false_negatives,
        score.tpr,
        score.fnr,
        score.cpf,
        if score.degenerate {
            " (degenerate)"
        } else {
            ""
        }
    );
    if let Some(path) = out {
        let mut text = String::from(
            "# link scores\ntp,fp,fn,d_tp_um,d_fp_um,d_fn_um,tpr,fnr,cpf,degenerate\n",
        );
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            score.true_positives,
            score.false_positives,
            score.false_negatives,
            score.d_tp,
            score.d_fp,
            score.d_fn,
            score.tpr,
            score.fnr,
            score.cpf,
            score.degenerate
        )
        .unwrap();
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .code(3)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct SweepCell {
    frame_rate: f64,
    accel: f64,
    concentration: String,
    seed: u64,
}

impl SweepCell {
    fn dataset(&self) -> String {
        format!(
            "r{}_a{}_{}_s{}",
            self.frame_rate, self.accel, self.concentration, self.seed
        )
    }
}

fn run_cell(
    cell: &SweepCell,
    cfg: &Config,
    tracker_cfg: &TrackerConfig,
    out: &Path,
    maps: bool,
) -> Result<Vec<ScoreRow>, CodedError> {
    let dir = out.join(cell.dataset());
    ensure_dir(&dir)?;
    let vessels = cfg.simulate.vessels(cell.seed).code(2)?;
    let n_concurrent = config::parse_concentration(&cell.concentration)
        .code(2)?
        .n_concurrent();
    let mut sim_cfg = cfg
        .simulate
        .build(cell.seed, Some(cell.frame_rate))
        .code(2)?;
    sim_cfg.n_concurrent = n_concurrent;
    let flow = cfg.flow.build(Some(cell.accel));
    let sim = simulate(&vessels, &flow, &sim_cfg)?;
    io::write_localizations(&sim.seq, dir.join("loc.csv"))?;
    io::write_links(&sim.gt, dir.join("links_gt.csv"))?;
    io::write_centerline(&sim.centerline, dir.join("centerline.csv"))?;

    let mut rows = Vec::with_capacity(2);
    for mode in [TrackerMode::Accel, TrackerMode::ConstVel] {
        let label = config::mode_label(mode);
        let (tracks, links) = track(&sim.seq, tracker_cfg, mode)?;
        io::write_tracks(
            &tracks,
            sim.seq.frame_rate,
            dir.join(format!("tracks_{label}.csv")),
        )?;
        io::write_links(&links, dir.join(format!("links_{label}.csv")))?;
        let score = score_links(&links, &sim.gt, &sim.seq)?;
        if maps {
            let map_dir = dir.join(format!("maps_{label}"));
            ensure_dir(&map_dir)?;
            let track_rows: Vec<io::TrackRow> = tracks.iter().flat_map(KalmanTrack::rows).collect();
            if !track_rows.is_empty() {
                let dense = render_dense_tracks(&track_rows, sim.seq.frame_rate, cfg, None)?;
                io::write_dense_tracks(&dense, map_dir.join("dense_tracks.csv"))?;
                write_maps(&dense, cfg.render.pixel(), &map_dir)?;
            }
        }
        rows.push(ScoreRow {
            dataset: cell.dataset(),
            frame_rate: cell.frame_rate,
            accel_mm_s2: cell.accel,
            concentration: cell.concentration.clone(),
            seed: cell.seed,
            mode,
            score,
        });
    }
    Ok(rows)
}

fn score_csv(rows: &[ScoreRow], tracker_cfg: &TrackerConfig) -> String {
    let mut out =
        String::from("# one row per (dataset, mode); config echo columns follow the metrics\n");
    out.push_str(
        "dataset,frame_rate_hz,accel_mm_s2,concentration,seed,mode,tp,fp,fn,d_tp_um,d_fp_um,d_fn_um,tpr,fnr,cpf,degenerate,sigma_a,r_std,v_max,init_cost_max,min_track_len,a_init_mode\n",
    );
    for r in rows {
        let s = &r.score;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.frame_rate,
            r.accel_mm_s2,
            r.concentration,
            r.seed,
            config::mode_label(r.mode),
            s.true_positives,
            s.false_positives,
            s.false_negatives,
            s.d_tp,
            s.d_fp,
            s.d_fn,
            s.tpr,
            s.fnr,
            s.cpf,
            s.degenerate,
            tracker_cfg.sigma_a,
            tracker_cfg.r_std,
            tracker_cfg.v_max,
            tracker_cfg.init_cost_max,
            tracker_cfg.min_track_len,
            match tracker_cfg.a_init_mode {
                ulmtrack_core::AInitMode::Kinematic => "kinematic",
                ulmtrack_core::AInitMode::CentralDiff => "central-diff",
            },
        )
        .unwrap();
    }
    out
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# per-group means over paired (proposed, baseline) runs\n");
    out.push_str("group,n_pairs");
    for metric in ["tpr", "fnr", "cpf"] {
        for col in [
            "proposed_mean",
            "proposed_std",
            "baseline_mean",
            "baseline_std",
            "diff_mean",
        ] {
            out.push_str(&format!(",{metric}_{col}"));
        }
    }
    out.push('\n');
    for r in rows {
        let mut line = format!("{},{}", r.group, r.n_pairs);
        for i in 0..3 {
            line.push_str(&format!(
                ",{},{},{},{},{}",
                r.proposed_mean[i],
                r.proposed_std[i],
                r.baseline_mean[i],
                r.baseline_std[i],
                r.diff_mean[i]
            ));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(
    config: Option<PathBuf>,
    seed: Option<u64>,
    jobs: usize,
    maps: bool,
    out: PathBuf,
) -> CmdResult {
    let cfg = Config::load(config.as_deref()).code(2)?;
    let tracker_cfg = cfg.tracker.build().code(2)?;
    let sweep = &cfg.sweep;
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => sweep.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(anyhow!(
            "no seeds: pass --seed or list them under [sweep] seeds in the config"
        ))
        .code(2);
    }
    if sweep.frame_rates.is_empty()
        || sweep.accelerations.is_empty()
        || sweep.concentrations.is_empty()
    {
        return Err(anyhow!("sweep lists must be non-empty")).code(2);
    }
    for c in &sweep.concentrations {
        config::parse_concentration(c).code(2)?;
    }
    let maps = maps || sweep.maps;

    let mut cells = Vec::new();
    for &frame_rate in &sweep.frame_rates {
        for &accel in &sweep.accelerations {
            for conc in &sweep.concentrations {
                for &seed in &seeds {
                    cells.push(SweepCell {
                        frame_rate,
                        accel,
                        concentration: conc.clone(),
                        seed,
                    });
                }
            }
        }
    }
    ensure_dir(&out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot build worker pool")
        .code(4)?;
    let results: Vec<(String, Result<Vec<ScoreRow>, CodedError>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                (
                    cell.dataset(),
                    run_cell(cell, &cfg, &tracker_cfg, &out, maps),
                )
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures: Vec<(String, CodedError)> = Vec::new();
    for (dataset, res) in results {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push((dataset, e)),
        }
    }
    rows.sort_by(|a, b| {
        (
            a.frame_rate,
            a.accel_mm_s2,
            &a.concentration,
            a.seed,
            config::mode_label(a.mode),
        )
            .partial_cmp(&(
                b.frame_rate,
                b.accel_mm_s2,
                &b.concentration,
                b.seed,
                config::mode_label(b.mode),
            ))
            .expect("finite keys")
    });
    std::fs::write(out.join("scores.csv"), score_csv(&rows, &tracker_cfg))
        .context("cannot write scores.csv")
        .code(3)?;
    if !rows.is_empty() {
        let summary = metrics::summarize(
            &rows,
            &[
                GroupKey::FrameRate,
                GroupKey::Accel,
                GroupKey::Concentration,
            ],
        )?;
        std::fs::write(out.join("summary.csv"), summary_csv(&summary))
            .context("cannot write summary.csv")
            .code(3)?;
    }
    if !failures.is_empty() {
        let mut text = String::from("# cells that failed\ndataset,error\n");
        for (dataset, e) in &failures {
            writeln!(text, "{dataset},\"{e}\"").unwrap();
        }
        std::fs::write(out.join("failures.csv"), text)
            .context("cannot write failures.csv")
            .code(3)?;
        let (dataset, first) = failures.swap_remove(0);
        return Err(CodedError {
            code: first.code,
            err: first.err.context(format!(
                "{} of {} sweep cells failed (first: {dataset})",
                failures.len() + 1,
                cells.len()
            )),
        });
    }
    println!(
        "swept {} cells ({} tracker runs) -> {}",
        cells.len(),
        rows.len(),
        out.display()
    );
    Ok(())
}
