//! Frame-by-frame detector: spatial map, temporal buffer, fusion, ABS,
//! segmentation and component extraction.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::Detection;
use crate::error::{Error, Result};
use crate::fusion::{abs_suppress, extract_detections, fuse, segment, AbsConfig, ThresholdConfig};
use crate::io::{write_csv, write_detections_csv, MapKind, OutputWriter};
use crate::plane::{BinaryMask, FeatureMap, Frame};
use crate::spatial::{compute_smap, SpatialConfig};
use crate::temporal::{normalize_map, temporal_range, SmapBuffer, TemporalConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub spatial: SpatialConfig,
    pub temporal: TemporalConfig,
    pub abs: AbsConfig,
    pub threshold: ThresholdConfig,
    /// Persist Smap, Tmap and STmap alongside the final map.
    pub emit_intermediate: bool,
    /// Also write headerless `f32` dumps of every persisted map.
    pub raw_dump: bool,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        self.temporal.validate()?;
        self.abs.validate()?;
        self.threshold.validate()
    }

    /// Frames consumed before the first detection output.
    pub fn warm_up_frames(&self) -> usize {
        2 * self.temporal.gap
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameStatus {
    WarmingUp,
    Detected,
}

/// Wall-clock time spent in each stage for one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub smap: Duration,
    pub tmap: Duration,
    pub fuse: Duration,
    pub abs: Duration,
    pub segment: Duration,
    pub detect: Duration,
}

impl StageTimings {
    pub const STAGES: [&'static str; 6] = ["smap", "tmap", "fuse", "abs", "segment", "detect"];

    pub fn stages(&self) -> [(&'static str, Duration); 6] {
        [
            ("smap", self.smap),
            ("tmap", self.tmap),
            ("fuse", self.fuse),
            ("abs", self.abs),
            ("segment", self.segment),
            ("detect", self.detect),
        ]
    }

    pub fn total(&self) -> Duration {
        self.stages().iter().map(|(_, d)| *d).sum()
    }

    fn accumulate(&mut self, other: &StageTimings) {
        self.smap += other.smap;
        self.tmap += other.tmap;
        self.fuse += other.fuse;
        self.abs += other.abs;
        self.segment += other.segment;
        self.detect += other.detect;
    }

    fn divided(&self, n: u32) -> StageTimings {
        if n == 0 {
            return StageTimings::default();
        }
        StageTimings {
            smap: self.smap / n,
            tmap: self.tmap / n,
            fuse: self.fuse / n,
            abs: self.abs / n,
            segment: self.segment / n,
            detect: self.detect / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intermediates {
    pub smap: FeatureMap,
    pub tmap: Option<FeatureMap>,
    pub stmap: Option<FeatureMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub frame_index: u64,
    pub status: FrameStatus,
    pub stlfd_map: Option<FeatureMap>,
    pub mask: Option<BinaryMask>,
    pub detections: Vec<Detection>,
    pub timing: StageTimings,
    pub intermediates: Option<Intermediates>,
}

impl FrameResult {
    /// Equality on everything except timings.
    pub fn same_output(&self, other: &FrameResult) -> bool {
        self.frame_index == other.frame_index
            && self.status == other.status
            && self.stlfd_map == other.stlfd_map
            && self.mask == other.mask
            && self.detections == other.detections
            && self.intermediates == other.intermediates
    }
}

struct Tail {
    tmap: FeatureMap,
    stmap: FeatureMap,
    stlfd: FeatureMap,
    mask: BinaryMask,
    detections: Vec<Detection>,
}

fn detect_tail(
    cfg: &DetectorConfig,
    frame_index: u64,
    maps: [&FeatureMap; 3],
    timing: &mut StageTimings,
) -> Result<Tail> {
    let t = Instant::now();
    let tmap = normalize_map(&temporal_range(maps[0], maps[1], maps[2])?);
    timing.tmap = t.elapsed();

    let t = Instant::now();
    let stmap = fuse(maps[0], &tmap)?;
    timing.fuse = t.elapsed();

    let t = Instant::now();
    let stlfd = abs_suppress(&stmap, &cfg.abs)?;
    timing.abs = t.elapsed();

    let t = Instant::now();
    let mask = segment(&stlfd, &cfg.threshold);
    timing.segment = t.elapsed();

    let t = Instant::now();
    let detections = extract_detections(&mask, &stlfd, frame_index)?;
    timing.detect = t.elapsed();

    Ok(Tail {
        tmap,
        stmap,
        stlfd,
        mask,
        detections,
    })
}

fn assemble(
    cfg: &DetectorConfig,
    frame_index: u64,
    smap: FeatureMap,
    tail: Option<Tail>,
    timing: StageTimings,
) -> FrameResult {
    match tail {
        None => FrameResult {
            frame_index,
            status: FrameStatus::WarmingUp,
            stlfd_map: None,
            mask: None,
            detections: Vec::new(),
            timing,
            intermediates: cfg.emit_intermediate.then_some(Intermediates {
                smap,
                tmap: None,
                stmap: None,
            }),
        },
        Some(t) => FrameResult {
            frame_index,
            status: FrameStatus::Detected,
            stlfd_map: Some(t.stlfd),
            mask: Some(t.mask),
            detections: t.detections,
            timing,
            intermediates: cfg.emit_intermediate.then_some(Intermediates {
                smap,
                tmap: Some(t.tmap),
                stmap: Some(t.stmap),
            }),
        },
    }
}

/// Streaming detector state for one sequence.
#[derive(Clone, Debug)]
pub struct Detector {
    cfg: DetectorConfig,
    buffer: SmapBuffer,
    dims: Option<(usize, usize)>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Detector {
            buffer: SmapBuffer::new(&cfg.temporal)?,
            cfg,
            dims: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &SmapBuffer {
        &self.buffer
    }

    /// Consumes the next frame. Only this frame and earlier spatial maps are read.
    pub fn process(&mut self, frame: &Frame) -> Result<FrameResult> {
        let index = frame.index();
        self.process_inner(frame).map_err(|e| e.at_frame(index))
    }

    fn process_inner(&mut self, frame: &Frame) -> Result<FrameResult> {
        match self.dims {
            Some(d) if d != frame.dims() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: frame.dims(),
                })
            }
            _ => {}
        }
        if let Some(newest) = self.buffer.newest_index() {
            if frame.index() != newest + 1 {
                return Err(Error::IndexOrder {
                    expected: newest + 1,
                    got: frame.index(),
                });
            }
        }

        let mut timing = StageTimings::default();
        let t = Instant::now();
        let smap = compute_smap(frame, &self.cfg.spatial)?;
        timing.smap = t.elapsed();

        self.buffer.push(frame.index(), smap)?;
        self.dims.get_or_insert(frame.dims());

        let tail = match self.buffer.triple() {
            Some(maps) => Some(detect_tail(&self.cfg, frame.index(), maps, &mut timing)?),
            None => None,
        };
        let smap = if self.cfg.emit_intermediate {
            self.buffer
                .get(frame.index())
                .cloned()
                .expect("just pushed")
        } else {
            FeatureMap::filled(0, 0, 0.0)
        };
        Ok(assemble(&self.cfg, frame.index(), smap, tail, timing))
    }
}

/// Processes a whole in-memory sequence at once: every spatial map is
/// computed up front (in parallel across frames), then each frame's tail.
///
/// Produces the same outputs as feeding the frames one by one to a
/// [`Detector`].
pub fn process_batch(frames: &[Frame], cfg: &DetectorConfig) -> Result<Vec<FrameResult>> {
    cfg.validate()?;
    for pair in frames.windows(2) {
        if pair[1].index() != pair[0].index() + 1 {
            return Err(Error::IndexOrder {
                expected: pair[0].index() + 1,
                got: pair[1].index(),
            });
        }
        pair[0].pixels().ensure_same_dims(pair[1].pixels())?;
    }
    let timed: Vec<(FeatureMap, Duration)> = frames
        .par_iter()
        .map(|f| {
            let t = Instant::now();
            compute_smap(f, &cfg.spatial)
                .map(|m| (m, t.elapsed()))
                .map_err(|e| e.at_frame(f.index()))
        })
        .collect::<Result<_>>()?;

    let n = cfg.temporal.gap;
    let mut results = Vec::with_capacity(frames.len());
    for (k, frame) in frames.iter().enumerate() {
        let mut timing = StageTimings {
            smap: timed[k].1,
            ..StageTimings::default()
        };
        let tail = if k >= 2 * n {
            let maps = [&timed[k].0, &timed[k - n].0, &timed[k - 2 * n].0];
            Some(
                detect_tail(cfg, frame.index(), maps, &mut timing)
                    .map_err(|e| e.at_frame(frame.index()))?,
            )
        } else {
            None
        };
        let smap = if cfg.emit_intermediate {
            timed[k].0.clone()
        } else {
            FeatureMap::filled(0, 0, 0.0)
        };
        results.push(assemble(cfg, frame.index(), smap, tail, timing));
    }
    Ok(results)
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub frames: usize,
    pub warming_up: usize,
    pub detected: usize,
    pub detections: usize,
    /// Mean over all frames; tail stages are averaged over detected frames.
    pub mean_timing: StageTimings,
    pub files: Vec<PathBuf>,
}

pub const DETECTIONS_FILE: &str = "detections.csv";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Serialize)]
struct TimingRow {
    frame: u64,
    stage: &'static str,
    micros: u64,
}

/// Runs the detector over `frames`, writing masks, final maps, optional
/// intermediates, the detections CSV and the timing report to `out_dir`.
///
/// `observer` sees every result right after its frame is processed and
/// before the next frame is pulled from the source.
pub fn run_sequence<I>(
    frames: I,
    cfg: &DetectorConfig,
    out_dir: &Path,
    mut observer: impl FnMut(&FrameResult),
) -> Result<RunSummary>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut detector = Detector::new(*cfg)?;
    let writer = OutputWriter::new(out_dir, cfg.raw_dump)?;
    let mut summary = RunSummary::default();
    let mut detections = Vec::new();
    let mut timing_rows = Vec::new();
    let mut smap_total = StageTimings::default();
    let mut tail_total = StageTimings::default();

    for frame in frames {
        let frame = frame?;
        let result = detector.process(&frame)?;
        let index = result.frame_index;
        let wrap = |e: Error| e.at_frame(index);

        summary.frames += 1;
        smap_total.smap += result.timing.smap;
        timing_rows.push(TimingRow {
            frame: index,
            stage: "smap",
            micros: result.timing.smap.as_micros() as u64,
        });

        if let Some(inter) = &result.intermediates {
            summary.files.extend(
                writer
                    .write_map(MapKind::Smap, index, &inter.smap)
                    .map_err(wrap)?,
            );
            if let Some(t) = &inter.tmap {
                summary
                    .files
                    .extend(writer.write_map(MapKind::Tmap, index, t).map_err(wrap)?);
            }
            if let Some(s) = &inter.stmap {
                summary
                    .files
                    .extend(writer.write_map(MapKind::Stmap, index, s).map_err(wrap)?);
            }
        }

        match result.status {
            FrameStatus::WarmingUp => summary.warming_up += 1,
            FrameStatus::Detected => {
                summary.detected += 1;
                let map = result
                    .stlfd_map
                    .as_ref()
                    .expect("detected frames carry a map");
                let mask = result.mask.as_ref().expect("detected frames carry a mask");
                summary
                    .files
                    .extend(writer.write_map(MapKind::Stlfd, index, map).map_err(wrap)?);
                summary
                    .files
                    .push(writer.write_mask(index, mask).map_err(wrap)?);
                tail_total.accumulate(&StageTimings {
                    smap: Duration::ZERO,
                    ..result.timing
                });
                for (stage, d) in result.timing.stages().into_iter().skip(1) {
                    timing_rows.push(TimingRow {
                        frame: index,
                        stage,
                        micros: d.as_micros() as u64,
                    });
                }
            }
        }
        summary.detections += result.detections.len();
        detections.extend(result.detections.iter().cloned());
        observer(&result);
    }

    let det_path = out_dir.join(DETECTIONS_FILE);
    write_detections_csv(&det_path, &detections)?;
    summary.files.push(det_path);
    let timing_path = out_dir.join(TIMING_FILE);
    write_csv(&timing_path, timing_rows)?;
    summary.files.push(timing_path);

    let mut mean = tail_total.divided(summary.detected as u32);
    mean.smap = smap_total.smap / (summary.frames.max(1) as u32);
    summary.mean_timing = mean;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moving_dot(index: u64) -> Frame {
        let cx = 12 + index as usize;
        Frame::from_fn(
            index,
            40,
            32,
            |x, y| {
                if x == cx && y == 16 {
                    0.9
                } else {
                    0.1
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn warm_up_then_detection() {
        let cfg = DetectorConfig {
            temporal: TemporalConfig { gap: 2 },
            ..DetectorConfig::default()
        };
        let mut det = Detector::new(cfg).unwrap();
        for i in 0..4 {
            let r = det.process(&moving_dot(i)).unwrap();
            assert_eq!(r.status, FrameStatus::WarmingUp);
            assert!(r.stlfd_map.is_none() && r.mask.is_none());
        }
        let r = det.process(&moving_dot(4)).unwrap();
        assert_eq!(r.status, FrameStatus::Detected);
        assert_eq!(r.detections.len(), 1);
        let (cx, cy) = r.detections[0].centroid;
        assert!(
            (cx - 16.0).abs() <= 1.0 && (cy - 16.0).abs() <= 1.0,
            "{cx},{cy}"
        );
    }

    #[test]
    fn stream_errors() {
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        det.process(&moving_dot(0)).unwrap();
        assert!(det.process(&moving_dot(2)).is_err());
        let other = Frame::from_fn(1, 20, 20, |_, _| 0.0).unwrap();
        let err = det.process(&other).unwrap_err();
        assert!(matches!(err, Error::AtFrame { index: 1, .. }));

        let bad = DetectorConfig {
            abs: AbsConfig {
                kernel: 4,
                enabled: true,
            },
            ..DetectorConfig::default()
        };
        assert!(Detector::new(bad).is_err());
    }

    #[test]
    fn batch_equals_streaming() {
        let cfg = DetectorConfig {
            temporal: TemporalConfig { gap: 1 },
            emit_intermediate: true,
            ..DetectorConfig::default()
        };
        let frames: Vec<Frame> = (0..6).map(moving_dot).collect();
        let batch = process_batch(&frames, &cfg).unwrap();
        let mut det = Detector::new(cfg).unwrap();
        for (f, b) in frames.iter().zip(&batch) {
            assert!(det.process(f).unwrap().same_output(b));
        }
    }
}
