//! Core raster types: grayscale images, binary masks and physical resolution.

use serde::{Deserialize, Serialize};

use crate::error::{OctError, Result};

/// Declared intensity range of an [`Image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntensityRange {
    /// Values in `[0, 1]`.
    Unit,
    /// Values in `[0, 255]`.
    Byte,
}

impl IntensityRange {
    pub fn low(self) -> f64 {
        0.0
    }

    pub fn high(self) -> f64 {
        match self {
            IntensityRange::Unit => 1.0,
            IntensityRange::Byte => 255.0,
        }
    }
}

/// A 2-D grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    range: IntensityRange,
    data: Vec<f64>,
}

impl Image {
    /// Minimum dimension accepted along either axis.
    pub const MIN_DIM: usize = 8;

    pub fn new(width: usize, height: usize, range: IntensityRange, data: Vec<f64>) -> Result<Self> {
        if width < Self::MIN_DIM || height < Self::MIN_DIM {
            return Err(OctError::ImageTooSmall(width, height));
        }
        assert_eq!(data.len(), width * height, "pixel buffer length mismatch");
        Ok(Image {
            width,
            height,
            range,
            data,
        })
    }

    /// Constructor without the minimum-dimension check, for kernels and
    /// filter outputs.
    pub(crate) fn assemble(
        width: usize,
        height: usize,
        range: IntensityRange,
        data: Vec<f64>,
    ) -> Self {
        assert_eq!(data.len(), width * height);
        Image {
            width,
            height,
            range,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, range: IntensityRange) -> Result<Self> {
        Self::new(width, height, range, vec![0.0; width * height])
    }

    /// Constant-filled image.
    pub fn filled(width: usize, height: usize, range: IntensityRange, v: f64) -> Result<Self> {
        Self::new(width, height, range, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn range(&self) -> IntensityRange {
        self.range
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance of all pixels.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    /// Affine rescale so the current min maps to the range low and the max to
    /// the range high. A constant image maps to the range low.
    pub fn rescale(&self, target: IntensityRange) -> Image {
        let lo = self.min();
        let hi = self.max();
        let (tlo, thi) = (target.low(), target.high());
        let data = if hi > lo {
            let scale = (thi - tlo) / (hi - lo);
            self.data.iter().map(|v| tlo + (v - lo) * scale).collect()
        } else {
            vec![tlo; self.data.len()]
        };
        Image {
            width: self.width,
            height: self.height,
            range: target,
            data,
        }
    }

    /// Clamp every pixel into the declared range.
    pub fn clamp_to_range(&mut self) {
        let (lo, hi) = (self.range.low(), self.range.high());
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
    }

    /// Pixel-wise map into a same-sized image with the given declared range.
    pub fn map(&self, range: IntensityRange, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            range,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_size(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(OctError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Lateral (columns) and axial (rows) pixel pitch in micrometers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Resolution {
    pub lateral_um_per_px: f64,
    pub axial_um_per_px: f64,
}

impl Resolution {
    pub fn new(lateral_um_per_px: f64, axial_um_per_px: f64) -> Result<Self> {
        if lateral_um_per_px <= 0.0 || axial_um_per_px <= 0.0 {
            return Err(OctError::InvalidConfig(
                "resolution values must be strictly positive".into(),
            ));
        }
        Ok(Resolution {
            lateral_um_per_px,
            axial_um_per_px,
        })
    }
}

impl Default for Resolution {
    /// Spectralis B-scan pitch: 5.88 um/px laterally, 3.87 um/px axially.
    fn default() -> Self {
        Resolution {
            lateral_um_per_px: 5.88,
            axial_um_per_px: 3.87,
        }
    }
}

/// Axial pixel count to micrometers.
pub fn to_um(thickness_px: f64, res: &Resolution) -> f64 {
    thickness_px * res.axial_um_per_px
}

/// Binary mask gating a same-sized image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height);
        Mask {
            width,
            height,
            bits,
        }
    }

    pub fn filled(width: usize, height: usize, v: bool) -> Self {
        Mask::new(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn invert(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn matches(&self, img: &Image) -> Result<()> {
        if self.width != img.width() || self.height != img.height() {
            return Err(OctError::DimensionMismatch(
                self.width,
                self.height,
                img.width(),
                img.height(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img_from(vals: &[f64]) -> Image {
        // pad a small value list into an 8x8 raster, repeating the last value
        let mut data = vec![*vals.last().unwrap(); 64];
        data[..vals.len()].copy_from_slice(vals);
        Image::new(8, 8, IntensityRange::Byte, data).unwrap()
    }

    #[test]
    fn rescale_byte_to_unit() {
        let img = img_from(&[0.0, 128.0, 255.0]);
        let out = img.rescale(IntensityRange::Unit);
        assert!((out.pixels()[0] - 0.0).abs() < 1e-12);
        assert!((out.pixels()[1] - 128.0 / 255.0).abs() < 1e-12);
        assert!((out.pixels()[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_constant_maps_to_low() {
        let img = Image::filled(8, 8, IntensityRange::Byte, 0.0).unwrap();
        let out = img.rescale(IntensityRange::Unit);
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescale_to_byte_affine() {
        let img = img_from(&[2.0, 4.0, 6.0]);
        // make min/max 2 and 6
        let mut data = img.pixels().to_vec();
        for v in data.iter_mut().skip(3) {
            *v = 2.0;
        }
        let img = Image::new(8, 8, IntensityRange::Byte, data).unwrap();
        let out = img.rescale(IntensityRange::Byte);
        assert!((out.pixels()[0] - 0.0).abs() < 1e-12);
        assert!((out.pixels()[1] - 127.5).abs() < 1e-12);
        assert!((out.pixels()[2] - 255.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_is_idempotent() {
        let img = img_from(&[3.0, 9.0, 27.0, 81.0]);
        let once = img.rescale(IntensityRange::Unit);
        let twice = once.rescale(IntensityRange::Unit);
        for (a, b) in once.pixels().iter().zip(twice.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn to_um_conversions() {
        let res = Resolution::default();
        assert_eq!(to_um(0.0, &res), 0.0);
        assert!((to_um(100.0, &res) - 387.0).abs() < 1e-9);
        assert!((to_um(13.0, &res) - 50.31).abs() < 1e-9);
    }

    #[test]
    fn too_small_image_rejected() {
        assert!(Image::zeros(4, 20, IntensityRange::Unit).is_err());
    }
}
