//! Frame ingestion, ground-truth CSV parsing and result persistence.
//!
//! Supported inputs are single-channel 8- or 16-bit PGM (P5) and PNG.
//! Feature maps are written as 16-bit PGM with `round(v * 65535)` samples and
//! optionally as headerless little-endian `f32` dumps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use log::warn;
use serde::Serialize;

use crate::annotation::{Detection, GroundTruthRecord};
use crate::error::{Error, Result};
use crate::plane::{BinaryMask, FeatureMap, Frame, Plane};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                detail: format!("expected PNG or PGM, found {other:?}"),
            })
        }
    }
    reader.decode().map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}

/// Reads a grayscale image and scales it to `[0, 1]`.
pub fn load_frame(path: impl AsRef<Path>, index: u64) -> Result<Frame> {
    let path = path.as_ref();
    let (w, h, data): (usize, usize, Vec<f64>) = match decode(path)? {
        DynamicImage::ImageLuma8(img) => (
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(img) => (
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                detail: format!(
                    "expected one 8- or 16-bit channel, found {:?}",
                    other.color()
                ),
            })
        }
    };
    Frame::new(index, Plane::new(w, h, data)?)
}

/// Frame index embedded in a file name: the last run of ASCII digits in the stem.
pub fn index_from_name(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

/// An ordered, lazily loaded sequence of frames on disk.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    dir: PathBuf,
    entries: Vec<(u64, PathBuf)>,
    width: usize,
    height: usize,
    gaps: Vec<(u64, u64)>,
}

impl FrameSequence {
    /// Lists files in `dir` matching `pattern` (a file-name glob). With no
    /// pattern, every `.png` and `.pgm` file is taken.
    pub fn open(dir: impl AsRef<Path>, pattern: Option<&str>) -> Result<Self> {
        let dir = dir.as_ref();
        let glob = pattern
            .map(glob::Pattern::new)
            .transpose()
            .map_err(|e| Error::InvalidConfig(format!("bad file pattern: {e}")))?;
        let pattern_label = pattern.unwrap_or("*.png|*.pgm").to_string();

        let mut entries = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let selected = match &glob {
                Some(g) => g.matches(name),
                None => matches!(
                    path.extension()
                        .and_then(|e| e.to_str())
                        .map(str::to_ascii_lowercase)
                        .as_deref(),
                    Some("png") | Some("pgm")
                ),
            };
            if !selected {
                continue;
            }
            let index = index_from_name(&path).ok_or_else(|| {
                Error::InvalidData(format!("no frame index in file name {}", path.display()))
            })?;
            entries.push((index, path));
        }
        if entries.is_empty() {
            return Err(Error::EmptySequence {
                dir: dir.into(),
                pattern: pattern_label,
            });
        }
        entries.sort();
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidData(format!(
                "frame index {} appears twice ({} and {})",
                w[0].0,
                w[0].1.display(),
                w[1].1.display()
            )));
        }

        // Only the first header is read here so that streaming a sequence
        // never opens a file ahead of the frame being processed. Later
        // files are checked as they are loaded, or eagerly by `check_dims`.
        let (width, height) = image_dims(&entries[0].1)?;

        let gaps: Vec<(u64, u64)> = entries
            .windows(2)
            .filter(|w| w[1].0 != w[0].0 + 1)
            .map(|w| (w[0].0, w[1].0))
            .collect();
        for (a, b) in &gaps {
            warn!("{}: frame indices jump from {a} to {b}", dir.display());
        }

        Ok(FrameSequence {
            dir: dir.into(),
            entries,
            width,
            height,
            gaps,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    pub fn entries(&self) -> &[(u64, PathBuf)] {
        &self.entries
    }

    /// Index discontinuities `(before, after)` found while listing.
    pub fn gaps(&self) -> &[(u64, u64)] {
        &self.gaps
    }

    pub fn path_of(&self, index: u64) -> Option<&Path> {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|k| self.entries[k].1.as_path())
    }

    pub fn load(&self, index: u64) -> Result<Frame> {
        let path = self.path_of(index).ok_or_else(|| {
            Error::InvalidData(format!("frame {index} not in {}", self.dir.display()))
        })?;
        self.load_checked(path, index)
    }

    fn load_checked(&self, path: &Path, index: u64) -> Result<Frame> {
        let frame = load_frame(path, index)?;
        if frame.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: frame.dims(),
            });
        }
        Ok(frame)
    }

    /// Reads every file header and fails on the first size that differs
    /// from the first frame.
    pub fn check_dims(&self) -> Result<()> {
        for (i, p) in &self.entries[1..] {
            let dims = image_dims(p)?;
            if dims != self.dims() {
                return Err(Error::DimensionMismatch {
                    expected: self.dims(),
                    actual: dims,
                }
                .at_frame(*i));
            }
        }
        Ok(())
    }

    /// Frames in ascending index order, each decoded only when reached.
    pub fn frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        self.entries
            .iter()
            .map(|(i, p)| self.load_checked(p, *i).map_err(|e| e.at_frame(*i)))
    }
}

fn image_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })?;
    Ok((w as usize, h as usize))
}

/// Parses a `frame,cx,cy,w,h` CSV, sorted by frame index.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["frame", "cx", "cy", "w", "h"] {
        return Err(Error::MalformedRecord {
            path: path.into(),
            line: 1,
            detail: format!("expected header frame,cx,cy,w,h, found {:?}", headers),
        });
    }
    let mut records = Vec::new();
    for row in reader.deserialize::<GroundTruthRecord>() {
        let rec = row.map_err(|e| Error::MalformedRecord {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        rec.validate().map_err(|e| Error::MalformedRecord {
            path: path.into(),
            line: 0,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    records.sort_by_key(|r| r.frame_index);
    Ok(records)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })
}

/// Writes serializable rows (with header) as an LF-terminated CSV.
pub fn write_csv<T: Serialize>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ground_truth(path: impl AsRef<Path>, records: &[GroundTruthRecord]) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return fs::write(path, "frame,cx,cy,w,h\n").map_err(|e| Error::io(path, e));
    }
    write_csv(path, records)
}

/// 16-bit sample for a unit-range value, rounding half up.
#[inline]
pub fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Binary PGM with maxval 65535 (big-endian samples).
pub fn write_pgm16(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    samples: &[u16],
) -> Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    bytes.reserve(samples.len() * 2);
    for s in samples {
        bytes.extend_from_slice(&s.to_be_bytes());
    }
    write_file(path.as_ref(), &bytes)
}

pub fn write_png16(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    samples: &[u16],
) -> Result<()> {
    let path = path.as_ref();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        width as u32,
        height as u32,
        samples.to_vec(),
    )
    .ok_or_else(|| Error::InvalidData("sample count does not match dimensions".into()))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

pub fn write_feature_pgm(path: impl AsRef<Path>, map: &FeatureMap) -> Result<()> {
    let samples: Vec<u16> = map
        .as_slice()
        .iter()
        .map(|&v| quantize_u16(v as f64))
        .collect();
    write_pgm16(path, map.width(), map.height(), &samples)
}

pub fn write_feature_raw(path: impl AsRef<Path>, map: &FeatureMap) -> Result<()> {
    let bytes: Vec<u8> = map
        .as_slice()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write_file(path.as_ref(), &bytes)
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let path = path.as_ref();
    let data: Vec<u8> = mask
        .as_slice()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .ok_or_else(|| Error::InvalidData("mask size mismatch".into()))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

/// Reads a 16-bit PGM/PNG feature map back to unit scale.
pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    match decode(path)? {
        DynamicImage::ImageLuma16(img) => Plane::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw()
                .iter()
                .map(|&v| (v as f64 / 65535.0) as f32)
                .collect(),
        ),
        DynamicImage::ImageLuma8(img) => Plane::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw()
                .iter()
                .map(|&v| (v as f64 / 255.0) as f32)
                .collect(),
        ),
        other => Err(Error::UnsupportedImage {
            path: path.into(),
            detail: format!(
                "feature map must be single channel, found {:?}",
                other.color()
            ),
        }),
    }
}

pub fn load_feature_raw(path: impl AsRef<Path>, width: usize, height: usize) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != width * height * 4 {
        return Err(Error::InvalidData(format!(
            "{} holds {} bytes, expected {} for {width}x{height}",
            path.display(),
            bytes.len(),
            width * height * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Plane::new(width, height, data)
}

pub fn load_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    match decode(path)? {
        DynamicImage::ImageLuma8(img) => Plane::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v >= 128).collect(),
        ),
        other => Err(Error::UnsupportedImage {
            path: path.into(),
            detail: format!("mask must be 8-bit gray, found {:?}", other.color()),
        }),
    }
}

/// Kind of per-frame map persisted by a detection run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Smap,
    Tmap,
    Stmap,
    Stlfd,
}

impl MapKind {
    pub fn prefix(self) -> &'static str {
        match self {
            MapKind::Smap => "smap",
            MapKind::Tmap => "tmap",
            MapKind::Stmap => "stmap",
            MapKind::Stlfd => "stlfd",
        }
    }
}

pub fn map_file_name(kind: MapKind, index: u64, ext: &str) -> String {
    format!("{}_{index:06}.{ext}", kind.prefix())
}

pub fn mask_file_name(index: u64) -> String {
    format!("mask_{index:06}.png")
}

/// Writes per-frame artefacts of a run into one directory.
#[derive(Clone, Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    raw_dump: bool,
}

impl OutputWriter {
    pub fn new(dir: impl Into<PathBuf>, raw_dump: bool) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputWriter { dir, raw_dump })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_map(&self, kind: MapKind, index: u64, map: &FeatureMap) -> Result<Vec<PathBuf>> {
        let pgm = self.dir.join(map_file_name(kind, index, "pgm"));
        write_feature_pgm(&pgm, map)?;
        let mut written = vec![pgm];
        if self.raw_dump {
            let raw = self.dir.join(map_file_name(kind, index, "f32"));
            write_feature_raw(&raw, map)?;
            written.push(raw);
        }
        Ok(written)
    }

    pub fn write_mask(&self, index: u64, mask: &BinaryMask) -> Result<PathBuf> {
        let path = self.dir.join(mask_file_name(index));
        write_mask_png(&path, mask)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct DetectionRow {
    frame: u64,
    cx: f64,
    cy: f64,
    score: f32,
}

pub fn write_detections_csv<'a>(
    path: impl AsRef<Path>,
    detections: impl IntoIterator<Item = &'a Detection>,
) -> Result<()> {
    let path = path.as_ref();
    let rows: Vec<DetectionRow> = detections
        .into_iter()
        .map(|d| DetectionRow {
            frame: d.frame_index,
            cx: d.centroid.0,
            cy: d.centroid.1,
            score: d.score,
        })
        .collect();
    if rows.is_empty() {
        return fs::write(path, "frame,cx,cy,score\n").map_err(|e| Error::io(path, e));
    }
    write_csv(path, rows)
}
