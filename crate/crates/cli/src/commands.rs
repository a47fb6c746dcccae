use std::path::Path;

use anyhow::{Context, Result};
use log::{debug, info};
use stlfd::eval::{evaluate_run, write_eval_report};
use stlfd::io::load_ground_truth;
use stlfd::manifest::MANIFEST_FILE;
use stlfd::pipeline::run_sequence;
use stlfd::{
    DetectorConfig, FrameSequence, MatchMode, Preset, RunManifest, SynthConfig, Synthesizer,
};

use crate::args::{DetectArgs, EvalArgs, SynthArgs};
use crate::UsageError;

fn base_manifest(config: Option<&Path>) -> Result<RunManifest> {
    match config {
        Some(path) => {
            RunManifest::load(path).with_context(|| format!("reading config {}", path.display()))
        }
        None => Ok(RunManifest::default()),
    }
}

fn detector_config(args: &DetectArgs, base: Option<DetectorConfig>) -> DetectorConfig {
    let mut cfg = base.unwrap_or_default();
    if let Some(gap) = args.gap {
        cfg.temporal.gap = gap as usize;
    }
    if let Some(patch) = args.patch {
        cfg.spatial.patch = patch;
    }
    if let Some(kernel) = args.abs_kernel {
        cfg.abs.kernel = kernel;
    }
    if args.no_abs {
        cfg.abs.enabled = false;
    }
    if let Some(k) = args.k_sigma {
        cfg.threshold.k_sigma = k;
    }
    cfg.emit_intermediate |= args.emit_intermediate;
    cfg.raw_dump |= args.raw_dump;
    cfg
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let base = base_manifest(args.config.as_deref())?;
    let input =
        args.input.clone().or(base.input).ok_or_else(|| {
            UsageError("detect needs --input DIR (or an input in --config)".into())
        })?;
    let pattern = args.pattern.clone().or(base.pattern);
    let cfg = detector_config(args, base.detector);
    cfg.validate()?;

    let seq = FrameSequence::open(&input, pattern.as_deref())?;
    let (w, h) = seq.dims();
    info!("{} frames of {w}x{h} in {}", seq.len(), input.display());

    let summary = run_sequence(seq.frames(), &cfg, &args.out, |r| {
        debug!(
            "frame {}: {:?}, {} detections, {:?}",
            r.frame_index,
            r.status,
            r.detections.len(),
            r.timing.total()
        );
    })
    .with_context(|| format!("processing {}", input.display()))?;

    let mut manifest = RunManifest::new("detect");
    manifest.input = Some(input);
    manifest.pattern = pattern;
    manifest.detector = Some(cfg);
    manifest.save(&args.out)?;

    let t = &summary.mean_timing;
    println!(
        "{} frames ({} warming up), {} detections, mean {:.2} ms/frame",
        summary.frames,
        summary.warming_up,
        summary.detections,
        t.total().as_secs_f64() * 1e3
    );
    println!("results in {}", args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let run_manifest_path = args.run.join(MANIFEST_FILE);
    let run_manifest = if run_manifest_path.is_file() {
        Some(RunManifest::load(&run_manifest_path)?)
    } else {
        None
    };

    let mut opts = run_manifest
        .as_ref()
        .and_then(|m| m.eval)
        .unwrap_or_default();
    if let Some(r) = args.match_radius {
        opts.rule.radius = r;
    }
    if args.containment {
        opts.rule.mode = MatchMode::Containment;
    }
    if let Some(s) = args.roc_steps {
        opts.roc_steps = s as usize;
    }
    if let Some(r) = args.ring_width {
        opts.ring_width = Some(r as usize);
    }

    let gt = load_ground_truth(&args.gt)?;
    let (input, pattern) = match &args.input {
        Some(dir) => (Some(dir.clone()), args.pattern.clone()),
        None => match &run_manifest {
            Some(m) => (
                m.input.clone().filter(|p| p.is_dir()),
                args.pattern.clone().or(m.pattern.clone()),
            ),
            None => (None, None),
        },
    };
    let seq = input
        .as_ref()
        .map(|dir| FrameSequence::open(dir, pattern.as_deref()))
        .transpose()?;
    if let Some(seq) = &seq {
        seq.check_dims()?;
    } else {
        info!("no input frames available; SCRG and BSF are skipped");
    }

    let report = evaluate_run(&args.run, &gt, seq.as_ref(), &opts)
        .with_context(|| format!("evaluating {}", args.run.display()))?;
    let out = args.out.clone().unwrap_or_else(|| args.run.join("eval"));
    write_eval_report(&report, &out)?;

    let mut manifest = RunManifest::new("eval");
    manifest.input = input;
    manifest.pattern = pattern;
    manifest.ground_truth = Some(args.gt.clone());
    manifest.eval = Some(opts);
    manifest.save(&out)?;

    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    println!("frames {} targets {}", report.frames, report.targets);
    println!("auc {}", fmt(report.roc.auc));
    println!("mean_scrg {}", fmt(report.mean_scrg));
    println!("mean_bsf {}", fmt(report.mean_bsf));
    if let Some((pd, pf)) = report.operating_point {
        println!("operating pd {} pf {pf:e}", fmt(pd));
    }
    println!("results in {}", out.display());
    Ok(())
}

fn synth_config(args: &SynthArgs, base: &RunManifest) -> SynthConfig {
    let mut cfg = match (args.preset, base.synth) {
        (Some(p), _) => SynthConfig::preset(p),
        (None, Some(c)) => c,
        (None, None) => SynthConfig::preset(Preset::Drift),
    };
    if let Some(seed) = args.seed.or(base.seed) {
        cfg.seed = seed;
    }
    if let Some(f) = args.frames {
        cfg.frames = f as usize;
    }
    if let Some(w) = args.width {
        cfg.width = w;
    }
    if let Some(h) = args.height {
        cfg.height = h;
    }
    if let Some(a) = args.amplitude {
        cfg.target.amplitude = a;
    }
    if let Some(d) = args.drift {
        cfg.background.drift = d;
    }
    if let Some(j) = args.jitter {
        cfg.background.jitter_amp = j;
    }
    if let Some(v) = args.velocity {
        cfg.target.velocity = v;
    }
    if let Some(s) = args.start {
        cfg.target.start = s;
    }
    if let Some(n) = args.noise {
        cfg.noise_sigma = n;
    }
    cfg
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let base = base_manifest(args.config.as_deref())?;
    let cfg = synth_config(args, &base);
    let scene = Synthesizer::new(cfg)?;
    let written = scene.write(&args.out)?;

    let mut manifest = RunManifest::new("synth");
    manifest.seed = Some(cfg.seed);
    manifest.synth = Some(cfg);
    manifest.save(&args.out)?;

    println!(
        "{} frames of {}x{} and {} ground-truth records in {}",
        written.frames.len(),
        cfg.width,
        cfg.height,
        scene.all_ground_truth().len(),
        args.out.display()
    );
    Ok(())
}
