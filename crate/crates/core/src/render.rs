//! Super-resolved raster accumulation: density, mean-speed and signed
//! mean speed-gradient maps, with exact CSV and 16-bit PGM export.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::interp::DenseTrack;

pub const DEFAULT_PIXEL_UM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Density,
    Speed,
    SpeedGradient,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::Density => "density",
            Channel::Speed => "speed",
            Channel::SpeedGradient => "speed_gradient",
        }
    }
}

/// Raster geometry shared by all channels of one rendering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapGeometry {
    /// Lower corner, µm.
    pub origin: Vector2<f64>,
    /// Pixel edge, µm.
    pub pixel: f64,
    pub width: usize,
    pub height: usize,
}

impl MapGeometry {
    pub fn new(origin: Vector2<f64>, pixel: f64, width: usize, height: usize) -> Result<Self> {
        if pixel <= 0.0 || pixel.is_nan() {
            return Err(Error::Config(format!(
                "pixel size must be positive: {pixel}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("map extent must be non-empty".into()));
        }
        Ok(MapGeometry {
            origin,
            pixel,
            width,
            height,
        })
    }

    /// Fits the extent to the sample bounds plus a 5% margin.
    pub fn fit(samples: impl Iterator<Item = Vector2<f64>>, pixel: f64) -> Result<Self> {
        let (mut min, mut max) = (
            Vector2::new(f64::INFINITY, f64::INFINITY),
            Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        let mut any = false;
        for p in samples {
            min = min.inf(&p);
            max = max.sup(&p);
            any = true;
        }
        if !any {
            return Err(Error::Data(
                "cannot fit a map extent to zero samples".into(),
            ));
        }
        let span = max - min;
        let margin = Vector2::new((0.05 * span.x).max(pixel), (0.05 * span.y).max(pixel));
        let origin = min - margin;
        let extent = span + margin * 2.0;
        MapGeometry::new(
            origin,
            pixel,
            (extent.x / pixel).ceil() as usize + 1,
            (extent.y / pixel).ceil() as usize + 1,
        )
    }

    fn index_of(&self, p: Vector2<f64>) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.pixel;
        let fy = (p.y - self.origin.y) / self.pixel;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        if ix >= self.width || iy >= self.height {
            return None;
        }
        Some(iy * self.width + ix)
    }
}

/// One accumulating channel: per-pixel sums and sample counts. Mean channels
/// report `sum / count`; the density channel reports the count itself.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub geom: MapGeometry,
    pub channel: Channel,
    sums: Vec<f64>,
    counts: Vec<u64>,
    /// Samples that fell outside the extent.
    pub dropped: u64,
}

impl FieldMap {
    pub fn new(geom: MapGeometry, channel: Channel) -> Self {
        let n = geom.width * geom.height;
        FieldMap {
            geom,
            channel,
            sums: vec![0.0; n],
            counts: vec![0u64; n],
            dropped: 0,
        }
    }

    fn deposit(&mut self, p: Vector2<f64>, value: f64) {
        match self.geom.index_of(p) {
            Some(i) => {
                self.sums[i] += value;
                self.counts[i] += 1;
            }
            None => self.dropped += 1,
        }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        let i = iy * self.geom.width + ix;
        match self.channel {
            Channel::Density => self.counts[i] as f64,
            _ => {
                if self.counts[i] > 0 {
                    self.sums[i] / self.counts[i] as f64
                } else {
                    0.0
                }
            }
        }
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.geom.width + ix]
    }

    /// Total deposited samples (excludes dropped ones).
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Merges another map accumulated over the same geometry (sums and
    /// counts add, so parallel accumulation stays order-independent).
    pub fn merge(&mut self, other: &FieldMap) -> Result<()> {
        if self.geom != other.geom || self.channel != other.channel {
            return Err(Error::Data(
                "cannot merge maps with different geometry".into(),
            ));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.dropped += other.dropped;
        Ok(())
    }

    /// Immutable value grid for export.
    pub fn snapshot(&self) -> MapGrid {
        let mut values = Vec::with_capacity(self.sums.len());
        for iy in 0..self.geom.height {
            for ix in 0..self.geom.width {
                values.push(self.value(ix, iy));
            }
        }
        MapGrid {
            geom: self.geom,
            channel: self.channel,
            values,
        }
    }
}

/// The three standard channels over one shared extent.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMaps {
    pub density: FieldMap,
    pub speed: FieldMap,
    pub gradient: FieldMap,
}

impl FieldMaps {
    pub fn new(geom: MapGeometry) -> Self {
        FieldMaps {
            density: FieldMap::new(geom, Channel::Density),
            speed: FieldMap::new(geom, Channel::Speed),
            gradient: FieldMap::new(geom, Channel::SpeedGradient),
        }
    }

    /// Deposits every sample of a dense track into all three channels.
    pub fn accumulate(&mut self, dense: &DenseTrack) {
        for s in &dense.samples {
            let p = Vector2::new(s.x, s.y);
            self.density.deposit(p, 1.0);
            self.speed.deposit(p, s.speed);
            self.gradient.deposit(p, s.gradient);
        }
    }
}

/// Finalized raster values in row-major order (row 0 = lowest y).
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    pub geom: MapGeometry,
    pub channel: Channel,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Pgm16,
    Csv,
}

/// Writes a map: exact CSV, or 16-bit PGM with the linear scale recorded in
/// the header comment. A `SpeedGradient` PGM is split into `_pos`/`_neg`
/// files since PGM has no signed channel.
pub fn write_map(grid: &MapGrid, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        MapFormat::Csv => write_map_csv(grid, path),
        MapFormat::Pgm16 => {
            if grid.channel == Channel::SpeedGradient {
                let (pos, neg) = split_signed(grid);
                write_pgm16(&pos, suffixed(path, "_pos"))?;
                write_pgm16(&neg, suffixed(path, "_neg"))
            } else {
                write_pgm16(grid, path)
            }
        }
    }
}

fn suffixed(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map(|e| e.to_string_lossy().to_string());
    let name = match ext {
        Some(e) => format!("{stem}{suffix}.{e}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// Positive and negative parts of a signed grid (both non-negative).
pub fn split_signed(grid: &MapGrid) -> (MapGrid, MapGrid) {
    let pos = grid.values.iter().map(|v| v.max(0.0)).collect();
    let neg = grid.values.iter().map(|v| (-v).max(0.0)).collect();
    (
        MapGrid {
            geom: grid.geom,
            channel: grid.channel,
            values: pos,
        },
        MapGrid {
            geom: grid.geom,
            channel: grid.channel,
            values: neg,
        },
    )
}

pub fn write_map_csv(grid: &MapGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = &grid.geom;
    let mut out = format!(
        "# channel={} origin_x_um={} origin_y_um={} pixel_um={} width={} height={}\n",
        grid.channel.label(),
        g.origin.x,
        g.origin.y,
        g.pixel,
        g.width,
        g.height
    );
    for iy in 0..g.height {
        let row: Vec<String> = (0..g.width)
            .map(|ix| grid.values[iy * g.width + ix].to_string())
            .collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_map_csv(path: impl AsRef<Path>) -> Result<MapGrid> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = content.lines().enumerate();
    let (_, meta) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty map file"))?;
    if !meta.starts_with('#') {
        return Err(Error::parse(path, 1, "expected `#` metadata header"));
    }
    let pairs: Vec<(&str, &str)> = meta
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect();
    let get = |key: &str| -> Result<&str> {
        pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::parse(path, 1, format!("metadata missing {key}")))
    };
    let parse_meta_f64 = |key: &str| -> Result<f64> {
        get(key)?
            .parse::<f64>()
            .map_err(|_| Error::parse(path, 1, format!("invalid {key}")))
    };
    let channel = match get("channel")? {
        "density" => Channel::Density,
        "speed" => Channel::Speed,
        "speed_gradient" => Channel::SpeedGradient,
        other => return Err(Error::parse(path, 1, format!("unknown channel {other:?}"))),
    };
    let geom = MapGeometry::new(
        Vector2::new(
            parse_meta_f64("origin_x_um")?,
            parse_meta_f64("origin_y_um")?,
        ),
        parse_meta_f64("pixel_um")?,
        parse_meta_f64("width")? as usize,
        parse_meta_f64("height")? as usize,
    )?;
    let mut values = Vec::with_capacity(geom.width * geom.height);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, no + 1, format!("invalid value {field:?}")))?,
            );
        }
    }
    if values.len() != geom.width * geom.height {
        return Err(Error::Data(format!(
            "map has {} values, expected {}",
            values.len(),
            geom.width * geom.height
        )));
    }
    Ok(MapGrid {
        geom,
        channel,
        values,
    })
}

/// 16-bit binary PGM with the linear value scale recorded as a comment:
/// `v → round((v − min) / (max − min) · 65535)`, big-endian samples.
pub fn write_pgm16(grid: &MapGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &grid.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if grid.values.is_empty() {
        lo = 0.0;
        hi = 0.0;
    }
    let span = hi - lo;
    let mut buf: Vec<u8> = Vec::with_capacity(64 + grid.values.len() * 2);
    buf.extend_from_slice(
        format!(
            "P5\n# channel={} scale_min={lo} scale_max={hi} pixel_um={}\n{} {}\n65535\n",
            grid.channel.label(),
            grid.geom.pixel,
            grid.geom.width,
            grid.geom.height
        )
        .as_bytes(),
    );
    for &v in &grid.values {
        let q = if span > 0.0 {
            ((v - lo) / span * 65535.0).round() as u16
        } else {
            0
        };
        buf.extend_from_slice(&q.to_be_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
