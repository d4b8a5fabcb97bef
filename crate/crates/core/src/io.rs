//! Plain-CSV file formats.
//!
//! Every file starts with a one-line `#` metadata header followed by a column
//! header row. Floats are written with Rust's shortest round-trip formatting,
//! so read∘write is the identity on stored values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::interp::DenseTrack;
use crate::tracker::KalmanTrack;
use crate::types::{FrameSeq, Link, LinkSet, LinkSource, Localization};

/// Splits a metadata line (`# key=value key=value ...`) into pairs.
fn meta_pairs(line: &str) -> Vec<(&str, &str)> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

fn meta_value<'a>(pairs: &[(&'a str, &'a str)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

struct CsvReader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> CsvReader<'a> {
    fn new(path: &'a Path, content: &'a str) -> Self {
        CsvReader {
            path,
            lines: content.lines().enumerate(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.path, line, msg)
    }

    /// Reads the `#` metadata line (line 1).
    fn meta_line(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, line)) if line.trim_start().starts_with('#') => Ok((i + 1, line)),
            Some((i, _)) => Err(self.err(i + 1, "expected `#` metadata header")),
            None => Err(self.err(1, "empty file, expected `#` metadata header")),
        }
    }

    fn header_line(&mut self) -> Option<(usize, &'a str)> {
        self.lines.next().map(|(i, l)| (i + 1, l))
    }

    fn rows(self) -> impl Iterator<Item = (usize, &'a str)> {
        self.lines
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty())
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid {what}: {field:?}")))
}

fn parse_usize(path: &Path, line: usize, field: &str, what: &str) -> Result<usize> {
    let t = field.trim();
    t.parse::<usize>().map_err(|_| {
        let hint = if t.starts_with('-') {
            format!("{what} must be non-negative: {field:?}")
        } else {
            format!("invalid {what}: {field:?}")
        };
        Error::parse(path, line, hint)
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Localisation CSV: `# frame_rate_hz=<f>` / `frame,x_um,y_um[,gt_id]`
// ---------------------------------------------------------------------------

pub fn read_localizations(path: impl AsRef<Path>) -> Result<FrameSeq> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut rd = CsvReader::new(path, &content);

    let (meta_no, meta) = rd.meta_line()?;
    let pairs = meta_pairs(meta);
    let rate = meta_value(&pairs, "frame_rate_hz")
        .ok_or_else(|| rd.err(meta_no, "metadata header missing frame_rate_hz"))?;
    let frame_rate = parse_f64(path, meta_no, rate, "frame_rate_hz")?;
    if frame_rate <= 0.0 || frame_rate.is_nan() {
        return Err(rd.err(meta_no, format!("frame_rate_hz must be positive: {rate}")));
    }

    let has_gt = match rd.header_line() {
        Some((no, header)) => {
            let cols: Vec<&str> = header.split(',').map(str::trim).collect();
            match cols.as_slice() {
                ["frame", "x_um", "y_um"] => false,
                ["frame", "x_um", "y_um", "gt_id"] => true,
                _ => {
                    return Err(rd.err(
                        no,
                        format!("expected header frame,x_um,y_um[,gt_id], got {header:?}"),
                    ))
                }
            }
        }
        None => false, // header-only file: zero frames
    };

    let mut seq = FrameSeq::new(frame_rate).map_err(|e| match e {
        Error::Data(msg) => Error::parse(path, meta_no, msg),
        other => other,
    })?;
    let mut last_frame = 0usize;
    for (no, row) in rd.rows() {
        let fields: Vec<&str> = row.split(',').collect();
        let want = if has_gt { 4 } else { 3 };
        if fields.len() != want {
            return Err(Error::parse(
                path,
                no,
                format!("expected {want} fields, got {}", fields.len()),
            ));
        }
        let frame = parse_usize(path, no, fields[0], "frame index")?;
        if frame < last_frame {
            return Err(Error::parse(
                path,
                no,
                format!("frame indices must be non-decreasing ({last_frame} then {frame})"),
            ));
        }
        last_frame = frame;
        let x = parse_f64(path, no, fields[1], "x_um")?;
        let y = parse_f64(path, no, fields[2], "y_um")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(path, no, "non-finite position"));
        }
        let gt_id = if has_gt {
            let t = fields[3].trim();
            if t.is_empty() {
                None
            } else {
                Some(
                    t.parse::<u64>()
                        .map_err(|_| Error::parse(path, no, format!("invalid gt_id: {t:?}")))?,
                )
            }
        } else {
            None
        };
        seq.push(Localization { frame, x, y, gt_id });
    }
    Ok(seq)
}

pub fn write_localizations(seq: &FrameSeq, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let has_gt = seq.frames.iter().flatten().any(|loc| loc.gt_id.is_some());
    let mut out = format!("# frame_rate_hz={}\n", seq.frame_rate);
    out.push_str(if has_gt {
        "frame,x_um,y_um,gt_id\n"
    } else {
        "frame,x_um,y_um\n"
    });
    for (frame, locs) in seq.frames.iter().enumerate() {
        for loc in locs {
            if has_gt {
                match loc.gt_id {
                    Some(id) => writeln!(out, "{frame},{},{},{id}", loc.x, loc.y).unwrap(),
                    None => writeln!(out, "{frame},{},{},", loc.x, loc.y).unwrap(),
                }
            } else {
                writeln!(out, "{frame},{},{}", loc.x, loc.y).unwrap();
            }
        }
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Track CSV: one row per accepted point with the filtered state
// ---------------------------------------------------------------------------

/// One stored track point with its filtered state, in interface units
/// (µm, mm/s, mm/s²).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub track_id: u64,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
}

const TRACK_HEADER: &str = "track_id,frame,x_um,y_um,vx_mm_s,vy_mm_s,ax_mm_s2,ay_mm_s2";

pub fn write_tracks(tracks: &[KalmanTrack], frame_rate: f64, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<TrackRow> = tracks.iter().flat_map(KalmanTrack::rows).collect();
    write_track_rows(&rows, frame_rate, path)
}

pub fn write_track_rows(rows: &[TrackRow], frame_rate: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("# frame_rate_hz={frame_rate} units=um,mm_s,mm_s2\n{TRACK_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.track_id, r.frame, r.x, r.y, r.vx, r.vy, r.ax, r.ay
        )
        .unwrap();
    }
    write_string(path, &out)
}

/// Reads track rows together with the stored frame rate.
pub fn read_track_rows(path: impl AsRef<Path>) -> Result<(Vec<TrackRow>, f64)> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut rd = CsvReader::new(path, &content);

    let (meta_no, meta) = rd.meta_line()?;
    let pairs = meta_pairs(meta);
    let rate = meta_value(&pairs, "frame_rate_hz")
        .ok_or_else(|| rd.err(meta_no, "metadata header missing frame_rate_hz"))?;
    let frame_rate = parse_f64(path, meta_no, rate, "frame_rate_hz")?;

    if let Some((no, header)) = rd.header_line() {
        if header.trim() != TRACK_HEADER {
            return Err(Error::parse(
                path,
                no,
                format!("expected header {TRACK_HEADER:?}, got {header:?}"),
            ));
        }
    }

    let mut rows = Vec::new();
    for (no, row) in rd.rows() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                path,
                no,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let track_id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(path, no, format!("invalid track_id: {:?}", fields[0])))?;
        rows.push(TrackRow {
            track_id,
            frame: parse_usize(path, no, fields[1], "frame index")?,
            x: parse_f64(path, no, fields[2], "x_um")?,
            y: parse_f64(path, no, fields[3], "y_um")?,
            vx: parse_f64(path, no, fields[4], "vx_mm_s")?,
            vy: parse_f64(path, no, fields[5], "vy_mm_s")?,
            ax: parse_f64(path, no, fields[6], "ax_mm_s2")?,
            ay: parse_f64(path, no, fields[7], "ay_mm_s2")?,
        });
    }
    Ok((rows, frame_rate))
}

// ---------------------------------------------------------------------------
// LinkSet CSV: `frame,a,b`
// ---------------------------------------------------------------------------

pub fn write_links(links: &LinkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let source = match links.source {
        LinkSource::GroundTruth => "ground_truth",
        LinkSource::Tracker => "tracker",
    };
    let mut out = format!("# source={source}\nframe,a,b\n");
    for link in &links.links {
        writeln!(out, "{},{},{}", link.frame, link.a, link.b).unwrap();
    }
    write_string(path, &out)
}

pub fn read_links(path: impl AsRef<Path>) -> Result<LinkSet> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut rd = CsvReader::new(path, &content);

    let (meta_no, meta) = rd.meta_line()?;
    let pairs = meta_pairs(meta);
    let source = match meta_value(&pairs, "source") {
        Some("ground_truth") => LinkSource::GroundTruth,
        Some("tracker") | None => LinkSource::Tracker,
        Some(other) => {
            return Err(rd.err(meta_no, format!("unknown link source {other:?}")));
        }
    };

    if let Some((no, header)) = rd.header_line() {
        if header.trim() != "frame,a,b" {
            return Err(Error::parse(
                path,
                no,
                format!("expected header \"frame,a,b\", got {header:?}"),
            ));
        }
    }

    let mut set = LinkSet::new(source);
    for (no, row) in rd.rows() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let link = Link::new(
            parse_usize(path, no, fields[0], "frame index")?,
            parse_usize(path, no, fields[1], "index a")?,
            parse_usize(path, no, fields[2], "index b")?,
        );
        set.insert(link)
            .map_err(|e| Error::parse(path, no, e.to_string()))?;
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Centerline CSV: `x_um,y_um` (dense ground-truth geometry)
// ---------------------------------------------------------------------------

pub fn write_centerline(points: &[Vector2<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# units=um\nx_um,y_um\n");
    for p in points {
        writeln!(out, "{},{}", p.x, p.y).unwrap();
    }
    write_string(path, &out)
}

pub fn read_centerline(path: impl AsRef<Path>) -> Result<Vec<Vector2<f64>>> {
    let path = path.as_ref();
    let content = read_to_string(path)?;
    let mut rd = CsvReader::new(path, &content);
    rd.meta_line()?;
    rd.header_line();
    let mut pts = Vec::new();
    for (no, row) in rd.rows() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                no,
                format!("expected 2 fields, got {}", fields.len()),
            ));
        }
        pts.push(Vector2::new(
            parse_f64(path, no, fields[0], "x_um")?,
            parse_f64(path, no, fields[1], "y_um")?,
        ));
    }
    Ok(pts)
}

// ---------------------------------------------------------------------------
// DenseTrack CSV: `track_id,x_um,y_um,speed_mm_s,grad`
// ---------------------------------------------------------------------------

pub fn write_dense_tracks(tracks: &[DenseTrack], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# units=um,mm_s,mm_s2\ntrack_id,x_um,y_um,speed_mm_s,grad\n");
    for t in tracks {
        for s in &t.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                t.track_id, s.x, s.y, s.speed, s.gradient
            )
            .unwrap();
        }
    }
    write_string(path, &out)
}
