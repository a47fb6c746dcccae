//! Ground-truth records and detector output.
//!
//! Positions use pixel-centre coordinates: pixel `(x, y)` covers the point
//! `(x, y)`, and a frame of width `W` spans `0..=W-1` along x.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annotated target: centre and box extent in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl GroundTruthRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 1.0 && self.h >= 1.0) {
            return Err(Error::InvalidData(format!(
                "ground-truth box {}x{} at frame {} must be at least 1x1",
                self.w, self.h, self.frame_index
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidData(format!(
                "ground-truth centre at frame {} is not finite",
                self.frame_index
            )));
        }
        Ok(())
    }

    /// Checks that the box lies inside a `width x height` frame.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        let inside = self.cx - self.w / 2.0 >= 0.0
            && self.cy - self.h / 2.0 >= 0.0
            && self.cx + self.w / 2.0 <= (width - 1) as f64
            && self.cy + self.h / 2.0 <= (height - 1) as f64;
        if !inside {
            return Err(Error::DegenerateGeometry(format!(
                "ground-truth box at frame {} ({}, {}) {}x{} leaves the {width}x{height} frame",
                self.frame_index, self.cx, self.cy, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Closed containment test for a point.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).abs() <= self.w / 2.0 && (y - self.cy).abs() <= self.h / 2.0
    }

    /// Integer pixel rectangle covered by the box, clipped to the frame.
    pub fn pixel_rect(&self, width: usize, height: usize) -> Option<PixelRect> {
        let x0 = (self.cx - self.w / 2.0).ceil().max(0.0);
        let y0 = (self.cy - self.h / 2.0).ceil().max(0.0);
        let x1 = (self.cx + self.w / 2.0).floor().min((width - 1) as f64);
        let y1 = (self.cy + self.h / 2.0).floor().min((height - 1) as f64);
        if x1 < x0 || y1 < y0 {
            return None;
        }
        Some(PixelRect {
            x: x0 as usize,
            y: y0 as usize,
            width: (x1 - x0) as usize + 1,
            height: (y1 - y0) as usize + 1,
        })
    }
}

/// Inclusive-origin pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelRect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.width && y < self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// One connected component of a segmented map.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub frame_index: u64,
    /// Score-weighted centroid `(x, y)`.
    pub centroid: (f64, f64),
    pub bbox: PixelRect,
    /// Peak map value inside the component.
    pub score: f32,
    pub pixels: usize,
}
