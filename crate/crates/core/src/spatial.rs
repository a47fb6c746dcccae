//! Spatial local-contrast feature map (Smap).
//!
//! The kernel is a 3x3 grid of square patches of side `patch`. The centre
//! patch is the target patch `T`; the eight surrounding patches are the
//! background patches, numbered clockwise from the top:
//!
//! ```text
//!  B8 | B1 | B2
//! ----+----+----
//!  B7 | T  | B3
//! ----+----+----
//!  B6 | B5 | B4
//! ```
//!
//! For each of the four opposite pairs `(B1,B5) (B2,B6) (B3,B7) (B4,B8)`:
//!
//! ```text
//! D_n = max(2 * max(T) - mean(B_n) - mean(B_n+4), 0)
//! ```
//!
//! and the raw response is `max(D) * min(D)`. A single dark direction
//! (as on a straight edge) drives `min(D)` to zero, so only blob-like
//! bright spots survive. The map is finally divided by its global maximum.
//!
//! Pixels closer than `(3 * patch - 1) / 2` to any border have no complete
//! kernel and are set to zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{normalize_by_max, FeatureMap, Frame, Plane, RawMap};
use crate::window::{box_sum, max_filter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialConfig {
    /// Side of one patch. The full kernel is `3 * patch` wide.
    pub patch: usize,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig { patch: 3 }
    }
}

impl SpatialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch < 3 || self.patch.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "spatial patch must be odd and >= 3, got {}",
                self.patch
            )));
        }
        Ok(())
    }

    /// Distance from the centre pixel to the outer edge of the kernel.
    pub fn kernel_radius(&self) -> usize {
        (3 * self.patch - 1) / 2
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        self.validate()?;
        let min = 3 * self.patch;
        if frame.width() < min || frame.height() < min {
            return Err(Error::TooSmall {
                width: frame.width(),
                height: frame.height(),
                min,
            });
        }
        Ok(())
    }
}

/// Offsets `(dx, dy)` of background patch centres B1..B8 in units of one patch.
const NEIGHBOURS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Contrasts below this are rounding residue from patch means, not signal.
/// Without the floor a perfectly flat frame would normalize noise to 1.
const CONTRAST_FLOOR: f64 = 1e-12;

#[inline]
fn directional_contrast(target_max: f64, a: f64, b: f64) -> f64 {
    let d = 2.0 * target_max - a - b;
    if d > CONTRAST_FLOOR {
        d
    } else {
        0.0
    }
}

#[inline]
fn contrast_product(target_max: f64, means: [f64; 8]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for n in 0..4 {
        let d = directional_contrast(target_max, means[n], means[n + 4]);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi * lo
}

/// Unnormalized response `max(D) * min(D)` using separable patch maxima and
/// running box sums.
pub fn smap_response(frame: &Frame, cfg: &SpatialConfig) -> Result<RawMap> {
    cfg.check_frame(frame)?;
    let (w, h) = frame.dims();
    let s = cfg.patch;
    let half = s / 2;
    let reach = cfg.kernel_radius();
    let area = (s * s) as f64;

    let patch_max = max_filter(frame.pixels(), half);
    let patch_sum = box_sum(frame.pixels(), half);
    let pm = patch_max.as_slice();
    let ps = patch_sum.as_slice();

    let offsets: Vec<isize> = NEIGHBOURS
        .iter()
        .map(|&(dx, dy)| (dy * s as isize) * w as isize + dx * s as isize)
        .collect();

    let mut out = vec![0.0f64; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        if y < reach || y + reach >= h {
            return;
        }
        for (x, v) in row.iter_mut().enumerate().take(w - reach).skip(reach) {
            let centre = (y * w + x) as isize;
            let mut means = [0.0; 8];
            for (m, off) in means.iter_mut().zip(&offsets) {
                *m = ps[(centre + off) as usize] / area;
            }
            *v = contrast_product(pm[centre as usize], means);
        }
    });
    Plane::new(w, h, out)
}

/// The same response evaluated literally, patch by patch, with no reuse
/// between neighbouring pixels. Used as the oracle for [`smap_response`].
pub fn smap_response_reference(frame: &Frame, cfg: &SpatialConfig) -> Result<RawMap> {
    cfg.check_frame(frame)?;
    let (w, h) = frame.dims();
    let s = cfg.patch as isize;
    let half = s / 2;
    let reach = cfg.kernel_radius();
    let px = frame.pixels();

    let patch_pixels = |cx: isize, cy: isize| {
        (cy - half..=cy + half).flat_map(move |y| (cx - half..=cx + half).map(move |x| (x, y)))
    };

    let mut out = Plane::filled(w, h, 0.0f64);
    for y in reach..h - reach {
        for x in reach..w - reach {
            let (cx, cy) = (x as isize, y as isize);
            let target_max = patch_pixels(cx, cy)
                .map(|(xx, yy)| px.get(xx as usize, yy as usize))
                .fold(f64::MIN, f64::max);
            let mut means = [0.0; 8];
            for (n, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
                let sum: f64 = patch_pixels(cx + dx * s, cy + dy * s)
                    .map(|(xx, yy)| px.get(xx as usize, yy as usize))
                    .sum();
                means[n] = sum / (s * s) as f64;
            }
            let mut d = [0.0; 4];
            for n in 0..4 {
                d[n] = directional_contrast(target_max, means[n], means[n + 4]);
            }
            let hi = d.iter().copied().fold(f64::MIN, f64::max);
            let lo = d.iter().copied().fold(f64::MAX, f64::min);
            out.set(x, y, hi * lo);
        }
    }
    Ok(out)
}

/// Normalized spatial feature map.
pub fn compute_smap(frame: &Frame, cfg: &SpatialConfig) -> Result<FeatureMap> {
    Ok(normalize_by_max(&smap_response(frame, cfg)?))
}

/// Normalized spatial feature map from the reference evaluation.
pub fn compute_smap_reference(frame: &Frame, cfg: &SpatialConfig) -> Result<FeatureMap> {
    Ok(normalize_by_max(&smap_response_reference(frame, cfg)?))
}
