//! Detection accounting, ROC sweeps and signal-to-clutter metrics.
//!
//! `pd` counts targets: a ground-truth record is detected when the rule in
//! [`MatchRule`] finds evidence for it. `pf` counts pixels: every set mask
//! pixel outside all ground-truth boxes is a false alarm, divided by the
//! total number of evaluated pixels.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::annotation::{Detection, GroundTruthRecord, PixelRect};
use crate::error::{Error, Result};
use crate::plane::{BinaryMask, FeatureMap, Plane};

/// Floor applied to standard deviations and SCR values before division or logarithm.
pub const EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Evidence within `radius` pixels of the target centre.
    Distance,
    /// Evidence inside the target box.
    Containment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchRule {
    pub radius: f64,
    pub mode: MatchMode,
}

impl Default for MatchRule {
    fn default() -> Self {
        MatchRule {
            radius: 4.0,
            mode: MatchMode::Distance,
        }
    }
}

impl MatchRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "match radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn matches(&self, gt: &GroundTruthRecord, x: f64, y: f64) -> bool {
        match self.mode {
            MatchMode::Distance => {
                let (dx, dy) = (x - gt.cx, y - gt.cy);
                dx * dx + dy * dy <= self.radius * self.radius
            }
            MatchMode::Containment => gt.contains(x, y),
        }
    }

    /// Pixel rectangle that bounds every pixel this rule can accept for `gt`.
    fn search_rect(
        &self,
        gt: &GroundTruthRecord,
        width: usize,
        height: usize,
    ) -> Option<PixelRect> {
        match self.mode {
            MatchMode::Containment => gt.pixel_rect(width, height),
            MatchMode::Distance => GroundTruthRecord {
                w: 2.0 * self.radius,
                h: 2.0 * self.radius,
                ..*gt
            }
            .pixel_rect(width, height),
        }
    }
}

/// Per-frame counts `(n_t, N_t, n_f)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameTally {
    pub hits: usize,
    pub targets: usize,
    pub false_pixels: usize,
}

impl Add for FrameTally {
    type Output = FrameTally;
    fn add(self, o: FrameTally) -> FrameTally {
        FrameTally {
            hits: self.hits + o.hits,
            targets: self.targets + o.targets,
            false_pixels: self.false_pixels + o.false_pixels,
        }
    }
}

impl AddAssign for FrameTally {
    fn add_assign(&mut self, o: FrameTally) {
        *self = *self + o;
    }
}

fn check_boxes(gt: &[GroundTruthRecord], width: usize, height: usize) -> Result<()> {
    gt.iter().try_for_each(|g| g.check_bounds(width, height))
}

/// Marks every pixel covered by at least one ground-truth box.
fn truth_cover(gt: &[GroundTruthRecord], width: usize, height: usize) -> Vec<bool> {
    let mut cover = vec![false; width * height];
    for rect in gt.iter().filter_map(|g| g.pixel_rect(width, height)) {
        for y in rect.y..rect.y + rect.height {
            cover[y * width + rect.x..y * width + rect.x + rect.width].fill(true);
        }
    }
    cover
}

/// Counts hits and false-alarm pixels for one frame.
///
/// With `detections`, each detection (highest score first) claims the
/// nearest unclaimed target its centroid matches. Without, a target is hit
/// when any set mask pixel matches it. False pixels always come from `mask`.
pub fn match_frame(
    mask: &BinaryMask,
    detections: Option<&[Detection]>,
    gt: &[GroundTruthRecord],
    rule: &MatchRule,
) -> Result<FrameTally> {
    rule.validate()?;
    let (w, h) = mask.dims();
    check_boxes(gt, w, h)?;

    let hits = match detections {
        Some(dets) => {
            let mut order: Vec<&Detection> = dets.iter().collect();
            order.sort_by(|a, b| b.score.total_cmp(&a.score));
            let mut claimed = vec![false; gt.len()];
            for d in order {
                let (x, y) = d.centroid;
                let best = gt
                    .iter()
                    .enumerate()
                    .filter(|(i, g)| !claimed[*i] && rule.matches(g, x, y))
                    .min_by(|(_, a), (_, b)| {
                        let da = (a.cx - x).hypot(a.cy - y);
                        let db = (b.cx - x).hypot(b.cy - y);
                        da.total_cmp(&db)
                    })
                    .map(|(i, _)| i);
                if let Some(i) = best {
                    claimed[i] = true;
                }
            }
            claimed.iter().filter(|&&c| c).count()
        }
        None => gt
            .iter()
            .filter(|g| {
                rule.search_rect(g, w, h).is_some_and(|r| {
                    (r.y..r.y + r.height).any(|y| {
                        (r.x..r.x + r.width)
                            .any(|x| mask.get(x, y) && rule.matches(g, x as f64, y as f64))
                    })
                })
            })
            .count(),
    };

    let cover = truth_cover(gt, w, h);
    let false_pixels = mask
        .as_slice()
        .iter()
        .zip(&cover)
        .filter(|(&set, &inside)| set && !inside)
        .count();

    Ok(FrameTally {
        hits,
        targets: gt.len(),
        false_pixels,
    })
}

/// `(pd, pf)` over a set of frames. `pd` is `None` when there are no targets.
pub fn aggregate_pd_pf(
    tallies: &[FrameTally],
    dims: (usize, usize),
    frame_count: usize,
) -> Result<(Option<f64>, f64)> {
    if frame_count == 0 {
        return Err(Error::InvalidData("need at least one frame".into()));
    }
    let total = tallies
        .iter()
        .copied()
        .fold(FrameTally::default(), Add::add);
    let pd = (total.targets > 0).then(|| total.hits as f64 / total.targets as f64);
    let pf = total.false_pixels as f64 / (dims.0 * dims.1 * frame_count) as f64;
    Ok((pd, pf))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pd: Option<f64>,
    pub pf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Thresholds strictly decreasing from 1 to 0.
    pub points: Vec<RocPoint>,
    /// Area under `pd` against `pf / max(pf)`; `None` without targets.
    pub auc: Option<f64>,
}

impl RocCurve {
    /// Best `pd` among points with `pf <= max_pf`.
    pub fn pd_at_pf(&self, max_pf: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.pf <= max_pf)
            .filter_map(|p| p.pd)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| {
            w[1].threshold < w[0].threshold
                && w[1].pf >= w[0].pf
                && match (w[0].pd, w[1].pd) {
                    (Some(a), Some(b)) => b >= a,
                    (None, None) => true,
                    _ => false,
                }
        })
    }
}

/// Uniform descending threshold grid `1, 1 - 1/(s-1), ..., 0`.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| 1.0 - i as f64 / (steps - 1) as f64)
        .collect()
}

/// Streaming ROC sweep: frames are added one at a time and reduced to
/// per-threshold counters, so maps need not be held in memory.
///
/// Equivalent to segmenting every map at every grid threshold (strict `>`,
/// compared as `f32`) and running [`match_frame`] in mask mode.
#[derive(Clone, Debug)]
pub struct RocAccumulator {
    rule: MatchRule,
    thresholds: Vec<f64>,
    thresholds_f32: Vec<f32>,
    hit_steps: Vec<u64>,
    false_steps: Vec<u64>,
    targets: u64,
    pixels: u64,
    frames: usize,
}

impl RocAccumulator {
    pub fn new(rule: MatchRule, steps: usize) -> Result<Self> {
        rule.validate()?;
        if steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "ROC needs at least 2 steps, got {steps}"
            )));
        }
        let thresholds = threshold_grid(steps);
        Ok(RocAccumulator {
            rule,
            thresholds_f32: thresholds.iter().map(|&t| t as f32).collect(),
            thresholds,
            hit_steps: vec![0; steps],
            false_steps: vec![0; steps],
            targets: 0,
            pixels: 0,
            frames: 0,
        })
    }

    /// First grid position whose threshold lies strictly below `v`.
    #[inline]
    fn first_exceeded(&self, v: f32) -> usize {
        self.thresholds_f32.partition_point(|&t| t >= v)
    }

    pub fn add_frame(&mut self, map: &FeatureMap, gt: &[GroundTruthRecord]) -> Result<()> {
        let (w, h) = map.dims();
        check_boxes(gt, w, h)?;
        let steps = self.thresholds.len();

        let cover = truth_cover(gt, w, h);
        for (&v, &inside) in map.as_slice().iter().zip(&cover) {
            if inside || v <= 0.0 {
                continue;
            }
            let i = self.first_exceeded(v);
            if i < steps {
                self.false_steps[i] += 1;
            }
        }

        for g in gt {
            let mut peak = f32::NEG_INFINITY;
            if let Some(r) = self.rule.search_rect(g, w, h) {
                for y in r.y..r.y + r.height {
                    for x in r.x..r.x + r.width {
                        if self.rule.matches(g, x as f64, y as f64) {
                            peak = peak.max(map.get(x, y));
                        }
                    }
                }
            }
            if peak > f32::NEG_INFINITY {
                let i = self.first_exceeded(peak);
                if i < steps {
                    self.hit_steps[i] += 1;
                }
            }
        }

        self.targets += gt.len() as u64;
        self.pixels += (w * h) as u64;
        self.frames += 1;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn finish(&self) -> Result<RocCurve> {
        if self.frames == 0 {
            return Err(Error::InvalidData("ROC sweep over zero frames".into()));
        }
        let mut hits = 0u64;
        let mut false_px = 0u64;
        let points: Vec<RocPoint> = self
            .thresholds
            .iter()
            .enumerate()
            .map(|(i, &threshold)| {
                hits += self.hit_steps[i];
                false_px += self.false_steps[i];
                RocPoint {
                    threshold,
                    pd: (self.targets > 0).then(|| hits as f64 / self.targets as f64),
                    pf: false_px as f64 / self.pixels as f64,
                }
            })
            .collect();
        let auc = roc_auc(&points);
        Ok(RocCurve { points, auc })
    }
}

/// Trapezoidal area under `pd` against `pf` rescaled by its largest
/// observed value. A curve that never leaves `pf = 0` scores its final `pd`.
pub fn roc_auc(points: &[RocPoint]) -> Option<f64> {
    let pds: Option<Vec<f64>> = points.iter().map(|p| p.pd).collect();
    let pds = pds?;
    let pf_max = points.iter().map(|p| p.pf).fold(0.0, f64::max);
    if points.is_empty() {
        return None;
    }
    if pf_max <= 0.0 {
        return pds.last().copied();
    }
    let mut area = 0.0;
    for i in 1..points.len() {
        let dx = (points[i].pf - points[i - 1].pf) / pf_max;
        area += dx * (pds[i] + pds[i - 1]) / 2.0;
    }
    Some(area)
}

/// ROC over a set of `(map, ground truth for that frame)` pairs.
pub fn roc_sweep<'a>(
    frames: impl IntoIterator<Item = (&'a FeatureMap, &'a [GroundTruthRecord])>,
    rule: &MatchRule,
    steps: usize,
) -> Result<RocCurve> {
    let mut acc = RocAccumulator::new(*rule, steps)?;
    for (map, gt) in frames {
        acc.add_frame(map, gt)?;
    }
    acc.finish()
}

/// Target and background-ring statistics for one annotated target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionStats {
    pub mu_t: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
    pub target: PixelRect,
    /// Box dilated by the ring width, clipped to the frame. The ring is this
    /// rectangle minus `target`.
    pub outer: PixelRect,
    pub target_pixels: usize,
    pub ring_pixels: usize,
}

/// Default ring width: the larger box side, rounded up.
pub fn default_ring_width(gt: &GroundTruthRecord) -> usize {
    gt.w.max(gt.h).ceil() as usize
}

pub fn region_stats<T: Copy + Into<f64>>(
    plane: &Plane<T>,
    gt: &GroundTruthRecord,
    ring_width: usize,
) -> Result<RegionStats> {
    let (w, h) = plane.dims();
    gt.check_bounds(w, h)?;
    let target = gt
        .pixel_rect(w, h)
        .ok_or_else(|| Error::DegenerateGeometry("target box covers no pixel".into()))?;
    let x0 = target.x.saturating_sub(ring_width);
    let y0 = target.y.saturating_sub(ring_width);
    let x1 = (target.x + target.width - 1 + ring_width).min(w - 1);
    let y1 = (target.y + target.height - 1 + ring_width).min(h - 1);
    let outer = PixelRect {
        x: x0,
        y: y0,
        width: x1 - x0 + 1,
        height: y1 - y0 + 1,
    };

    let mut t_sum = 0.0;
    let mut ring = Vec::with_capacity(outer.area());
    for y in y0..=y1 {
        for x in x0..=x1 {
            let v: f64 = plane.get(x, y).into();
            if target.contains(x, y) {
                t_sum += v;
            } else {
                ring.push(v);
            }
        }
    }
    if ring.is_empty() {
        return Err(Error::DegenerateGeometry(format!(
            "empty background ring around frame {} target with ring width {ring_width}",
            gt.frame_index
        )));
    }
    let n = ring.len() as f64;
    let mu_b = ring.iter().sum::<f64>() / n;
    let sigma_b = (ring.iter().map(|v| (v - mu_b) * (v - mu_b)).sum::<f64>() / n).sqrt();
    Ok(RegionStats {
        mu_t: t_sum / target.area() as f64,
        mu_b,
        sigma_b,
        target,
        outer,
        target_pixels: target.area(),
        ring_pixels: ring.len(),
    })
}

/// Signal-to-clutter ratio `|mu_t - mu_b| / max(sigma_b, EPSILON)`.
pub fn scr(stats: &RegionStats) -> f64 {
    scr_of(stats.mu_t, stats.mu_b, stats.sigma_b)
}

pub fn scr_of(mu_t: f64, mu_b: f64, sigma_b: f64) -> f64 {
    (mu_t - mu_b).abs() / sigma_b.max(EPSILON)
}

/// `10 log10(SCR_out / SCR_in)` with both ratios floored at [`EPSILON`].
pub fn scr_gain_db(scr_in: f64, scr_out: f64) -> f64 {
    10.0 * (scr_out.max(EPSILON) / scr_in.max(EPSILON)).log10()
}

/// `10 log10(sigma_in / sigma_out)` with both deviations floored at [`EPSILON`].
pub fn background_suppression_db(sigma_in: f64, sigma_out: f64) -> f64 {
    10.0 * (sigma_in.max(EPSILON) / sigma_out.max(EPSILON)).log10()
}

/// SCR gain and background suppression factor of `output` relative to `input`
/// for one target.
pub fn scrg_bsf<I: Copy + Into<f64>, O: Copy + Into<f64>>(
    input: &Plane<I>,
    output: &Plane<O>,
    gt: &GroundTruthRecord,
    ring_width: usize,
) -> Result<(f64, f64)> {
    input.ensure_same_dims(output)?;
    let before = region_stats(input, gt, ring_width)?;
    let after = region_stats(output, gt, ring_width)?;
    Ok((
        scr_gain_db(scr(&before), scr(&after)),
        background_suppression_db(before.sigma_b, after.sigma_b),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::segment_at;
    use proptest::prelude::*;

    fn gt(frame: u64, cx: f64, cy: f64, w: f64, h: f64) -> GroundTruthRecord {
        GroundTruthRecord {
            frame_index: frame,
            cx,
            cy,
            w,
            h,
        }
    }

    fn det(cx: f64, cy: f64, score: f32) -> Detection {
        Detection {
            frame_index: 0,
            centroid: (cx, cy),
            bbox: PixelRect {
                x: cx as usize,
                y: cy as usize,
                width: 1,
                height: 1,
            },
            score,
            pixels: 1,
        }
    }

    #[test]
    fn detection_within_radius_is_a_hit() {
        let mask = Plane::filled(32, 32, false);
        let truth = [gt(0, 10.0, 10.0, 4.0, 4.0)];
        let rule = MatchRule::default();
        let t = match_frame(&mask, Some(&[det(12.0, 10.0, 0.5)]), &truth, &rule).unwrap();
        assert_eq!(
            t,
            FrameTally {
                hits: 1,
                targets: 1,
                false_pixels: 0
            }
        );
        let t = match_frame(&mask, Some(&[det(15.0, 10.0, 0.5)]), &truth, &rule).unwrap();
        assert_eq!(t.hits, 0);
        let t = match_frame(&mask, Some(&[]), &truth, &rule).unwrap();
        assert_eq!(
            t,
            FrameTally {
                hits: 0,
                targets: 1,
                false_pixels: 0
            }
        );
    }

    #[test]
    fn one_detection_claims_one_target() {
        let mask = Plane::filled(32, 32, false);
        let truth = [gt(0, 10.0, 10.0, 2.0, 2.0), gt(0, 13.0, 10.0, 2.0, 2.0)];
        let rule = MatchRule::default();
        let t = match_frame(&mask, Some(&[det(12.0, 10.0, 0.9)]), &truth, &rule).unwrap();
        assert_eq!(t.hits, 1);
        let two = [det(12.0, 10.0, 0.9), det(11.0, 10.0, 0.1)];
        assert_eq!(
            match_frame(&mask, Some(&two), &truth, &rule).unwrap().hits,
            2
        );
    }

    #[test]
    fn containment_mode() {
        let mask = Plane::filled(32, 32, false);
        let truth = [gt(0, 10.0, 10.0, 4.0, 4.0)];
        let rule = MatchRule {
            radius: 4.0,
            mode: MatchMode::Containment,
        };
        assert_eq!(
            match_frame(&mask, Some(&[det(12.0, 12.0, 1.0)]), &truth, &rule)
                .unwrap()
                .hits,
            1
        );
        assert_eq!(
            match_frame(&mask, Some(&[det(12.5, 10.0, 1.0)]), &truth, &rule)
                .unwrap()
                .hits,
            0
        );
    }

    #[test]
    fn false_pixels_exclude_box_members() {
        let mut mask = Plane::filled(32, 32, false);
        for i in 0..13 {
            mask.set(20 + i % 5, 25 + i / 5, true);
        }
        // hit component: three pixels in the box, one just outside
        for (x, y) in [(10, 10), (11, 10), (12, 10), (13, 10)] {
            mask.set(x, y, true);
        }
        let truth = [gt(0, 10.0, 10.0, 4.0, 4.0)];
        let t = match_frame(&mask, None, &truth, &MatchRule::default()).unwrap();
        assert_eq!(
            t,
            FrameTally {
                hits: 1,
                targets: 1,
                false_pixels: 14
            }
        );
    }

    #[test]
    fn box_outside_frame_is_rejected() {
        let mask = Plane::filled(16, 16, false);
        let truth = [gt(0, 1.0, 8.0, 6.0, 6.0)];
        assert!(match_frame(&mask, None, &truth, &MatchRule::default()).is_err());
    }

    #[test]
    fn pd_pf_aggregation() {
        let tallies: Vec<FrameTally> = (0..100)
            .map(|i| FrameTally {
                hits: usize::from(i < 87),
                targets: 1,
                false_pixels: usize::from(i < 13),
            })
            .collect();
        let (pd, pf) = aggregate_pd_pf(&tallies, (256, 256), 100).unwrap();
        assert_eq!(pd, Some(0.87));
        assert_eq!(pf, 13.0 / 6_553_600.0);
        assert!((pf - 1.983e-6).abs() < 1e-9);

        let none = vec![FrameTally::default(); 4];
        assert_eq!(aggregate_pd_pf(&none, (10, 10), 4).unwrap().0, None);
        assert!(aggregate_pd_pf(&none, (10, 10), 0).is_err());
    }

    #[test]
    fn scr_examples() {
        assert!((scr_of(0.8, 0.2, 0.1) - 6.0).abs() < 1e-9);
        assert_eq!(scr_of(0.4, 0.4, 0.1), 0.0);
        assert!((scr_of(0.5, 0.2, 0.0) - 0.3 / EPSILON).abs() < 1e-3);
        assert!((scr_gain_db(2.0, 20.0) - 10.0).abs() < 1e-9);
        assert!((background_suppression_db(0.1, 0.001) - 20.0).abs() < 1e-9);
        assert!(scr_gain_db(0.0, 0.0).is_finite());
        assert!(background_suppression_db(0.0, 0.0).is_finite());
    }

    #[test]
    fn identity_transform_has_zero_gain() {
        let img = Plane::from_fn(32, 32, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0);
        let g = gt(0, 16.0, 16.0, 4.0, 4.0);
        let (scrg, bsf) = scrg_bsf(&img, &img, &g, default_ring_width(&g)).unwrap();
        assert_eq!((scrg, bsf), (0.0, 0.0));
    }

    #[test]
    fn region_geometry() {
        let img = Plane::filled(32, 32, 0.0f32);
        let g = gt(0, 16.0, 16.0, 4.0, 4.0);
        let s = region_stats(&img, &g, 4).unwrap();
        assert_eq!(
            s.target,
            PixelRect {
                x: 14,
                y: 14,
                width: 5,
                height: 5
            }
        );
        assert_eq!(s.ring_pixels, 13 * 13 - 25);
        let flat = Plane::filled(5, 5, 0.5f32);
        let whole = gt(0, 2.0, 2.0, 4.0, 4.0);
        assert!(matches!(
            region_stats(&flat, &whole, 3),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn perfect_detector_auc() {
        let truth: Vec<Vec<GroundTruthRecord>> = (0..5)
            .map(|f| vec![gt(f, 10.0 + f as f64, 12.0, 4.0, 4.0)])
            .collect();
        let maps: Vec<FeatureMap> = truth
            .iter()
            .map(|t| {
                let mut m = Plane::filled(32, 32, 0.0f32);
                m.set(t[0].cx as usize, t[0].cy as usize, 0.8);
                m
            })
            .collect();
        for steps in [2usize, 16, 256] {
            let roc = roc_sweep(
                maps.iter().zip(truth.iter().map(Vec::as_slice)),
                &MatchRule::default(),
                steps,
            )
            .unwrap();
            assert!(roc.is_monotone());
            assert_eq!(roc.points.len(), steps);
            assert_eq!(roc.points[0].pd, Some(0.0));
            assert!((roc.auc.unwrap() - 1.0).abs() <= 1.0 / steps as f64);
        }
    }

    #[test]
    fn roc_without_targets() {
        let m = Plane::filled(16, 16, 0.3f32);
        let roc = roc_sweep([(&m, &[][..])], &MatchRule::default(), 8).unwrap();
        assert!(roc.points.iter().all(|p| p.pd.is_none()));
        assert_eq!(roc.auc, None);
        assert_eq!(roc.points.last().unwrap().pf, 1.0);
        assert!(roc_sweep(std::iter::empty(), &MatchRule::default(), 8).is_err());
        assert!(RocAccumulator::new(MatchRule::default(), 1).is_err());
    }

    fn random_case(seed: u64, w: usize, h: usize) -> (FeatureMap, Vec<GroundTruthRecord>) {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        let map = Plane::from_fn(w, h, |_, _| match next() % 4 {
            0 => 0.0,
            1 => ((next() % 9) as f32) / 8.0,
            _ => (next() >> 11) as f32 / (1u64 << 53) as f32,
        });
        let n = (next() % 3) as usize;
        let truth = (0..n)
            .map(|_| {
                let bw = 1.0 + (next() % 4) as f64;
                let bh = 1.0 + (next() % 4) as f64;
                let cx = bw / 2.0 + (next() % (w as u64 - bw as u64)) as f64 * 0.999;
                let cy = bh / 2.0 + (next() % (h as u64 - bh as u64)) as f64 * 0.999;
                gt(0, cx, cy, bw, bh)
            })
            .collect();
        (map, truth)
    }

    /// Pixel-by-pixel oracle for mask-mode matching.
    fn brute_tally(mask: &BinaryMask, truth: &[GroundTruthRecord], rule: &MatchRule) -> FrameTally {
        let (w, h) = mask.dims();
        let mut hits = 0;
        for g in truth {
            let mut found = false;
            for y in 0..h {
                for x in 0..w {
                    found |= mask.get(x, y) && rule.matches(g, x as f64, y as f64);
                }
            }
            hits += usize::from(found);
        }
        let mut false_pixels = 0;
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y) && !truth.iter().any(|g| g.contains(x as f64, y as f64)) {
                    false_pixels += 1;
                }
            }
        }
        FrameTally {
            hits,
            targets: truth.len(),
            false_pixels,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn match_frame_agrees_with_pixel_oracle(seed in any::<u64>(), bits in any::<u64>(), radius in 0.5f64..4.0, containment in any::<bool>()) {
            let (_, truth) = random_case(seed, 8, 8);
            let mask = Plane::from_fn(8, 8, |x, y| bits >> (y * 8 + x) & 1 == 1);
            let rule = MatchRule { radius, mode: if containment { MatchMode::Containment } else { MatchMode::Distance } };
            prop_assert_eq!(match_frame(&mask, None, &truth, &rule).unwrap(), brute_tally(&mask, &truth, &rule));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roc_matches_per_threshold_segmentation(seeds in proptest::collection::vec(any::<u64>(), 1..4), steps in 2usize..24, containment in any::<bool>()) {
            let cases: Vec<_> = seeds.iter().map(|&s| random_case(s, 12, 10)).collect();
            let rule = MatchRule { radius: 2.5, mode: if containment { MatchMode::Containment } else { MatchMode::Distance } };
            let roc = roc_sweep(cases.iter().map(|(m, g)| (m, g.as_slice())), &rule, steps).unwrap();
            prop_assert!(roc.is_monotone());
            for (i, t) in threshold_grid(steps).into_iter().enumerate() {
                let tallies: Vec<FrameTally> = cases
                    .iter()
                    .map(|(m, g)| match_frame(&segment_at(m, t), None, g, &rule).unwrap())
                    .collect();
                let (pd, pf) = aggregate_pd_pf(&tallies, (12, 10), cases.len()).unwrap();
                prop_assert_eq!(roc.points[i].pd, pd);
                prop_assert_eq!(roc.points[i].pf, pf);
            }
        }
    }
}
