//! Evaluation of a persisted detection run against ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::{Detection, GroundTruthRecord, PixelRect};
use crate::error::{Error, Result};
use crate::io::{
    index_from_name, load_feature_map, load_feature_raw, load_mask_png, map_file_name,
    mask_file_name, write_csv, FrameSequence, MapKind,
};
use crate::metrics::{
    aggregate_pd_pf, default_ring_width, match_frame, scrg_bsf, MatchRule, RocAccumulator, RocCurve,
};
use crate::pipeline::DETECTIONS_FILE;

pub const ROC_FILE: &str = "roc.csv";
pub const SUMMARY_FILE: &str = "eval_summary.csv";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub rule: MatchRule,
    pub roc_steps: usize,
    /// Background ring width for SCR statistics; `None` uses the larger box side.
    pub ring_width: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            rule: MatchRule::default(),
            roc_steps: 256,
            ring_width: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub roc: RocCurve,
    pub frames: usize,
    pub targets: usize,
    pub mean_scrg: Option<f64>,
    pub mean_bsf: Option<f64>,
    /// `(pd, pf)` of the run's own masks and detections.
    pub operating_point: Option<(Option<f64>, f64)>,
}

/// Indices of the final maps stored in a run directory.
pub fn run_map_indices(run_dir: &Path) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))? {
        let path = entry.map_err(|e| Error::io(run_dir, e))?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        if name.starts_with("stlfd_") && name.ends_with(".pgm") {
            if let Some(i) = index_from_name(&path) {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Loads the final map of frame `index`, preferring the exact `f32` dump.
pub fn load_run_map(run_dir: &Path, index: u64) -> Result<crate::plane::FeatureMap> {
    let pgm = load_feature_map(run_dir.join(map_file_name(MapKind::Stlfd, index, "pgm")))?;
    let raw = run_dir.join(map_file_name(MapKind::Stlfd, index, "f32"));
    if raw.is_file() {
        return load_feature_raw(raw, pgm.width(), pgm.height());
    }
    Ok(pgm)
}

#[derive(Deserialize)]
struct DetectionRow {
    frame: u64,
    cx: f64,
    cy: f64,
    score: f32,
}

fn load_detections(path: &Path) -> Result<BTreeMap<u64, Vec<Detection>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })?;
    let mut out: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for row in reader.deserialize::<DetectionRow>() {
        let r = row.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        out.entry(r.frame).or_default().push(Detection {
            frame_index: r.frame,
            centroid: (r.cx, r.cy),
            bbox: PixelRect {
                x: r.cx.max(0.0) as usize,
                y: r.cy.max(0.0) as usize,
                width: 1,
                height: 1,
            },
            score: r.score,
            pixels: 0,
        });
    }
    Ok(out)
}

/// Sweeps the ROC over every final map in `run_dir`, computes mean SCRG/BSF
/// when the input frames are available, and scores the stored masks.
pub fn evaluate_run(
    run_dir: &Path,
    gt: &[GroundTruthRecord],
    input: Option<&FrameSequence>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let indices = run_map_indices(run_dir)?;
    if indices.is_empty() {
        return Err(Error::InvalidData(format!(
            "no stlfd_*.pgm maps in {}",
            run_dir.display()
        )));
    }
    let mut by_frame: BTreeMap<u64, Vec<GroundTruthRecord>> = BTreeMap::new();
    for g in gt {
        by_frame.entry(g.frame_index).or_default().push(*g);
    }
    let detections_path = run_dir.join(DETECTIONS_FILE);
    let detections = if detections_path.is_file() {
        Some(load_detections(&detections_path)?)
    } else {
        None
    };

    let mut roc = RocAccumulator::new(opts.rule, opts.roc_steps)?;
    let (mut scrg_sum, mut bsf_sum, mut scr_n) = (0.0, 0.0, 0usize);
    let mut tallies = Vec::new();
    let mut dims = (0, 0);
    let mut targets = 0;
    let empty = Vec::new();

    for &index in &indices {
        let map = load_run_map(run_dir, index).map_err(|e| e.at_frame(index))?;
        dims = map.dims();
        let truth = by_frame.get(&index).unwrap_or(&empty);
        targets += truth.len();
        roc.add_frame(&map, truth).map_err(|e| e.at_frame(index))?;

        if let Some(seq) = input {
            let frame = seq.load(index).map_err(|e| e.at_frame(index))?;
            frame
                .pixels()
                .ensure_same_dims(&map)
                .map_err(|e| e.at_frame(index))?;
            for g in truth {
                let ring = opts.ring_width.unwrap_or_else(|| default_ring_width(g));
                let (scrg, bsf) =
                    scrg_bsf(frame.pixels(), &map, g, ring).map_err(|e| e.at_frame(index))?;
                scrg_sum += scrg;
                bsf_sum += bsf;
                scr_n += 1;
            }
        }

        if let Some(dets) = &detections {
            let mask_path = run_dir.join(mask_file_name(index));
            if mask_path.is_file() {
                let mask = load_mask_png(&mask_path)?;
                let frame_dets = dets.get(&index).map(Vec::as_slice).unwrap_or(&[]);
                tallies.push(match_frame(&mask, Some(frame_dets), truth, &opts.rule)?);
            }
        }
    }

    let operating_point = if tallies.is_empty() {
        None
    } else {
        Some(aggregate_pd_pf(&tallies, dims, tallies.len())?)
    };
    Ok(EvalReport {
        roc: roc.finish()?,
        frames: indices.len(),
        targets,
        mean_scrg: (scr_n > 0).then(|| scrg_sum / scr_n as f64),
        mean_bsf: (scr_n > 0).then(|| bsf_sum / scr_n as f64),
        operating_point,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

#[derive(Serialize)]
struct RocRow {
    threshold: f64,
    pd: String,
    pf: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    metric: &'static str,
    value: String,
}

/// Writes `roc.csv` (`threshold,pd,pf`) and `eval_summary.csv` (`metric,value`).
pub fn write_eval_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let roc_path = out_dir.join(ROC_FILE);
    write_csv(
        &roc_path,
        report.roc.points.iter().map(|p| RocRow {
            threshold: p.threshold,
            pd: fmt_opt(p.pd),
            pf: p.pf,
        }),
    )?;
    let (op_pd, op_pf) = match report.operating_point {
        Some((pd, pf)) => (fmt_opt(pd), pf.to_string()),
        None => ("NA".into(), "NA".into()),
    };
    let rows = vec![
        SummaryRow {
            metric: "frames",
            value: report.frames.to_string(),
        },
        SummaryRow {
            metric: "targets",
            value: report.targets.to_string(),
        },
        SummaryRow {
            metric: "auc",
            value: fmt_opt(report.roc.auc),
        },
        SummaryRow {
            metric: "pd_at_pf_1e-4",
            value: fmt_opt(report.roc.pd_at_pf(1e-4)),
        },
        SummaryRow {
            metric: "mean_scrg",
            value: fmt_opt(report.mean_scrg),
        },
        SummaryRow {
            metric: "mean_bsf",
            value: fmt_opt(report.mean_bsf),
        },
        SummaryRow {
            metric: "operating_pd",
            value: op_pd,
        },
        SummaryRow {
            metric: "operating_pf",
            value: op_pf,
        },
    ];
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_csv(&summary_path, rows)?;
    Ok(vec![roc_path, summary_path])
}
