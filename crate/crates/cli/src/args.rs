use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stlfd::Preset;

#[derive(Debug, Parser)]
#[command(
    name = "stlfd",
    version,
    about = "Small moving target detection in infrared sequences"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detector over a directory of frames.
    Detect(DetectArgs),
    /// Score a detection run against ground truth.
    Eval(EvalArgs),
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Directory holding the frames.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// File-name glob selecting frames (default: every .png and .pgm).
    #[arg(long)]
    pub pattern: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML config or manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Frame gap between the three spatial maps of the temporal stage.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub gap: Option<u64>,
    /// Spatial patch side (odd, >= 3).
    #[arg(long, value_parser = parse_patch)]
    pub patch: Option<usize>,
    /// Window side of the background suppression step (odd).
    #[arg(long, value_parser = parse_odd)]
    pub abs_kernel: Option<usize>,
    /// Skip background suppression.
    #[arg(long)]
    pub no_abs: bool,
    /// Segmentation threshold in standard deviations above the mean.
    #[arg(long, value_parser = parse_non_negative)]
    pub k_sigma: Option<f64>,
    /// Also write the spatial, temporal and fused maps.
    #[arg(long)]
    pub emit_intermediate: bool,
    /// Write exact little-endian f32 dumps next to every PGM map.
    #[arg(long)]
    pub raw_dump: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Output directory of a `detect` run.
    #[arg(long)]
    pub run: PathBuf,
    /// Ground-truth CSV (`frame,cx,cy,w,h`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Input frames for SCRG/BSF; defaults to the input recorded in the run manifest.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// File-name glob for the input frames.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Where to write the ROC and summary (default: RUN/eval).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Centroid distance in pixels that counts as a hit.
    #[arg(long, value_parser = parse_non_negative)]
    pub match_radius: Option<f64>,
    /// Count a hit only when the centroid falls inside the target box.
    #[arg(long)]
    pub containment: bool,
    /// Number of thresholds in the ROC sweep.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub roc_steps: Option<u64>,
    /// Background ring width in pixels (default: the larger box side).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub ring_width: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene family.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// TOML config or manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub frames: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Peak contrast of the target above the background.
    #[arg(long, value_parser = parse_non_negative)]
    pub amplitude: Option<f64>,
    /// Background drift in pixels per frame.
    #[arg(long, value_name = "DX,DY", value_parser = parse_pair)]
    pub drift: Option<[f64; 2]>,
    /// Maximum integer background jitter in pixels.
    #[arg(long)]
    pub jitter: Option<u32>,
    /// Target velocity in pixels per frame.
    #[arg(long, value_name = "VX,VY", value_parser = parse_pair)]
    pub velocity: Option<[f64; 2]>,
    /// Target position in frame 0.
    #[arg(long, value_name = "X,Y", value_parser = parse_pair)]
    pub start: Option<[f64; 2]>,
    /// Standard deviation of the additive white noise.
    #[arg(long, value_parser = parse_non_negative)]
    pub noise: Option<f64>,
}

fn parse_odd(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_multiple_of(2) {
        return Err(format!("must be odd, got {v}"));
    }
    Ok(v)
}

fn parse_patch(s: &str) -> Result<usize, String> {
    let v = parse_odd(s)?;
    if v < 3 {
        return Err(format!("must be at least 3, got {v}"));
    }
    Ok(v)
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("must be a finite non-negative number, got {s}"));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a finite number: {t:?}"))
    };
    Ok([parse(a)?, parse(b)?])
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_odd("15"), Ok(15));
        assert!(parse_odd("14").is_err());
        assert!(parse_patch("1").is_err());
        assert_eq!(parse_pair("0.5, -1"), Ok([0.5, -1.0]));
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("1,nan").is_err());
        assert!(parse_non_negative("-0.1").is_err());
        assert_eq!(parse_preset("static"), Ok(Preset::Static));
    }
}
