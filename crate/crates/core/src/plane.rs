//! Row-major 2-D buffers and the image types built on them.
//!
//! Coordinates follow the image convention used everywhere in the crate:
//! `x` is the column, `y` is the row, and pixel `(x, y)` sits at
//! `data[y * width + x]`.

use crate::error::{Error, Result};

/// Smallest frame side that fits one 9x9 spatial kernel.
pub const MIN_FRAME_SIDE: usize = 9;

/// A dense row-major plane of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Per-pixel response map (spatial, temporal, fused or suppressed).
pub type FeatureMap = Plane<f32>;

/// Unnormalized spatial response kept in double precision.
pub type RawMap = Plane<f64>;

/// Segmentation output.
pub type BinaryMask = Plane<bool>;

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidData(format!(
                "plane of {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub(crate) fn ensure_same_dims<U>(&self, other: &Plane<U>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: (other.width, other.height),
            });
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl FeatureMap {
    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Population mean and standard deviation, accumulated in `f64`.
    pub fn mean_std(&self) -> (f64, f64) {
        if self.data.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.data.len() as f64;
        let mean = self.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self
            .data
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    }
}

/// Divides a raw response by its global maximum. An all-zero input stays all zero.
pub fn normalize_by_max(raw: &RawMap) -> FeatureMap {
    let peak = raw.as_slice().iter().copied().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return raw.map(|_| 0.0);
    }
    raw.map(|v| (v / peak) as f32)
}

/// One grayscale image of a sequence, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    index: u64,
    pixels: Plane<f64>,
}

impl Frame {
    pub fn new(index: u64, pixels: Plane<f64>) -> Result<Self> {
        let (w, h) = pixels.dims();
        if w < MIN_FRAME_SIDE || h < MIN_FRAME_SIDE {
            return Err(Error::TooSmall {
                width: w,
                height: h,
                min: MIN_FRAME_SIDE,
            });
        }
        if let Some(bad) = pixels.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!(
                "frame {index} has intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Frame { index, pixels })
    }

    pub fn from_fn(
        index: u64,
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        Frame::new(index, Plane::from_fn(width, height, f))
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }

    pub fn pixels(&self) -> &Plane<f64> {
        &self.pixels
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }
}
