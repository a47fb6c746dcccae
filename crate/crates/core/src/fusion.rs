//! Spatial-temporal fusion, adaptive background suppression (ABS),
//! dynamic-threshold segmentation and detection extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{Detection, PixelRect};
use crate::error::{Error, Result};
use crate::plane::{BinaryMask, FeatureMap, Plane};
use crate::window::max_filter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsConfig {
    /// Side `p` of the square suppression window; odd.
    pub kernel: usize,
    /// When false, suppression is skipped (ablation path).
    pub enabled: bool,
}

impl Default for AbsConfig {
    fn default() -> Self {
        AbsConfig {
            kernel: 15,
            enabled: true,
        }
    }
}

impl AbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "ABS kernel must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Multiplier on the map standard deviation: `t = mean + k_sigma * std`.
    pub k_sigma: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { k_sigma: 10.0 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.k_sigma.is_finite() || self.k_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "k_sigma must be finite and >= 0, got {}",
                self.k_sigma
            )));
        }
        Ok(())
    }
}

/// Element-wise product of the spatial and temporal maps.
pub fn fuse(smap: &FeatureMap, tmap: &FeatureMap) -> Result<FeatureMap> {
    smap.ensure_same_dims(tmap)?;
    let data = smap
        .as_slice()
        .iter()
        .zip(tmap.as_slice())
        .map(|(&s, &t)| s * t)
        .collect();
    Plane::new(smap.width(), smap.height(), data)
}

/// Pixel-level adaptive background suppression.
///
/// Each pixel is compared with the maximum `m` of the `p x p` window
/// centred on it (clipped at the borders). A pixel equal to `m` is kept;
/// any other pixel becomes `v * m`. With values in `[0, 1]` this never
/// raises a pixel, and weak pixels next to weak neighbourhoods fall off
/// quadratically while the neighbourhood of a strong peak is barely touched.
pub fn abs_suppress(stmap: &FeatureMap, cfg: &AbsConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    if !cfg.enabled {
        return Ok(stmap.clone());
    }
    let local_max = max_filter(stmap, cfg.kernel / 2);
    let mut out = stmap.clone();
    out.as_mut_slice()
        .par_chunks_mut(4096)
        .zip(local_max.as_slice().par_chunks(4096))
        .for_each(|(vals, maxes)| {
            for (v, &m) in vals.iter_mut().zip(maxes) {
                if *v != m {
                    *v *= m;
                }
            }
        });
    Ok(out)
}

/// `mean + k_sigma * std` over all pixels (population std).
pub fn dynamic_threshold(map: &FeatureMap, cfg: &ThresholdConfig) -> f64 {
    let (mean, std) = map.mean_std();
    mean + cfg.k_sigma * std
}

/// Sets every bit whose value is strictly above `threshold`.
///
/// The comparison happens in the map's `f32` domain.
pub fn segment_at(map: &FeatureMap, threshold: f64) -> BinaryMask {
    let t = threshold as f32;
    map.map(|v| v > t)
}

/// Dynamic-threshold segmentation.
pub fn segment(map: &FeatureMap, cfg: &ThresholdConfig) -> BinaryMask {
    segment_at(map, dynamic_threshold(map, cfg))
}

/// 8-connected components of `mask`, one detection each, highest score first.
///
/// Centroids are weighted by `score_map`; a component whose weights sum to
/// zero falls back to its plain pixel centroid.
pub fn extract_detections(
    mask: &BinaryMask,
    score_map: &FeatureMap,
    frame_index: u64,
) -> Result<Vec<Detection>> {
    mask.ensure_same_dims(score_map)?;
    let (w, h) = mask.dims();
    let bits = mask.as_slice();
    let mut visited = vec![false; bits.len()];
    let mut stack = Vec::new();
    let mut detections = Vec::new();

    for start in 0..bits.len() {
        if !bits[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);

        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        let (mut sw, mut swx, mut swy) = (0.0f64, 0.0f64, 0.0f64);
        let (mut sx, mut sy) = (0.0f64, 0.0f64);
        let mut peak = f32::MIN;
        let mut count = 0usize;

        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let v = score_map.as_slice()[i];
            count += 1;
            peak = peak.max(v);
            sw += v as f64;
            swx += v as f64 * x as f64;
            swy += v as f64 * y as f64;
            sx += x as f64;
            sy += y as f64;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);

            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if bits[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }

        let centroid = if sw > 0.0 {
            (swx / sw, swy / sw)
        } else {
            (sx / count as f64, sy / count as f64)
        };
        detections.push(Detection {
            frame_index,
            centroid,
            bbox: PixelRect {
                x: x0,
                y: y0,
                width: x1 - x0 + 1,
                height: y1 - y0 + 1,
            },
            score: peak,
            pixels: count,
        });
    }

    // Stable sort keeps raster order among equal scores.
    detections.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(detections)
}
