//! Streaming detection of small moving targets in infrared image sequences.
//!
//! Every frame goes through four stages:
//!
//! 1. [`spatial`]: a 3x3-patch local-contrast filter whose response is the
//!    product of the strongest and weakest of four opposite-direction
//!    contrasts, normalized per frame.
//! 2. [`temporal`]: the per-pixel range of the spatial maps at frames
//!    `k`, `k - n` and `k - 2n`, using past frames only.
//! 3. [`fusion`]: the product of both maps, followed by pixel-level
//!    adaptive background suppression and `mean + k_sigma * std`
//!    segmentation into connected detections.
//! 4. [`metrics`]: per-target detection and per-pixel false-alarm
//!    accounting, ROC sweeps and signal-to-clutter measures.
//!
//! [`pipeline::Detector`] strings the stages together for a live stream,
//! [`synth`] renders reproducible test scenes, and [`io`] handles PGM/PNG
//! frames, CSV annotations and run outputs.
//!
//! ```
//! use stlfd::{Detector, DetectorConfig, FrameStatus, Synthesizer, SynthConfig};
//!
//! let scene = Synthesizer::new(SynthConfig { frames: 12, ..SynthConfig::default() })?;
//! let mut detector = Detector::new(DetectorConfig::default())?;
//! let mut last = None;
//! for frame in scene.frames() {
//!     last = Some(detector.process(&frame)?);
//! }
//! let result = last.unwrap();
//! assert_eq!(result.status, FrameStatus::Detected);
//! let gt = scene.ground_truth(11)[0];
//! assert!(gt.contains(result.detections[0].centroid.0, result.detections[0].centroid.1));
//! # Ok::<(), stlfd::Error>(())
//! ```
//!
//! A longer guide lives in the `book/` directory of the repository; its
//! code samples are compiled and run as doc-tests of this crate.

pub mod annotation;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod plane;
pub mod spatial;
pub mod synth;
pub mod temporal;
pub mod window;

pub use annotation::{Detection, GroundTruthRecord, PixelRect};
pub use error::{Error, Result};
pub use fusion::{AbsConfig, ThresholdConfig};
pub use io::FrameSequence;
pub use manifest::RunManifest;
pub use metrics::{MatchMode, MatchRule, RocCurve};
pub use pipeline::{Detector, DetectorConfig, FrameResult, FrameStatus};
pub use plane::{BinaryMask, FeatureMap, Frame, Plane};
pub use spatial::SpatialConfig;
pub use synth::{Preset, SynthConfig, Synthesizer};
pub use temporal::{SmapBuffer, TemporalConfig};

// Book chapters are compiled here so `cargo test --doc` runs their snippets.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spatial.md")]
    mod spatial {}
    #[doc = include_str!("../../../book/src/temporal.md")]
    mod temporal {}
    #[doc = include_str!("../../../book/src/suppression.md")]
    mod suppression {}
    #[doc = include_str!("../../../book/src/streaming.md")]
    mod streaming {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
