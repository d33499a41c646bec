//! Forward/inverse 2-D DFT and center-shift helpers built on rustfft.

use num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::image::Image;

/// A complex frequency plane with the dimensions of its source image.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub bins: Vec<Complex<f64>>,
}

impl Spectrum {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<f64> {
        self.bins[row * self.width + col]
    }

    /// Magnitude plane, same layout.
    pub fn magnitude(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }
}

fn fft_pass(width: usize, height: usize, data: &mut [Complex<f64>], direction: FftDirection) {
    let mut planner = FftPlanner::new();
    // rows
    let row_fft = planner.plan_fft(width, direction);
    for r in 0..height {
        row_fft.process(&mut data[r * width..(r + 1) * width]);
    }
    // columns via transpose
    let mut t = vec![Complex::default(); data.len()];
    for r in 0..height {
        for c in 0..width {
            t[c * height + r] = data[r * width + c];
        }
    }
    let col_fft = planner.plan_fft(height, direction);
    for c in 0..width {
        col_fft.process(&mut t[c * height..(c + 1) * height]);
    }
    for r in 0..height {
        for c in 0..width {
            data[r * width + c] = t[c * height + r];
        }
    }
}

/// In-place forward 2-D DFT of a raw complex plane.
pub(crate) fn fft_complex_forward(width: usize, height: usize, data: &mut [Complex<f64>]) {
    fft_pass(width, height, data, FftDirection::Forward);
}

/// Forward 2-D DFT (unnormalized).
pub fn fft2(img: &Image) -> Spectrum {
    let mut bins: Vec<Complex<f64>> = img.pixels().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_pass(img.width(), img.height(), &mut bins, FftDirection::Forward);
    Spectrum {
        width: img.width(),
        height: img.height(),
        bins,
    }
}

/// Inverse 2-D DFT; returns the real part scaled by 1/(n1*n2).
pub fn ifft2_real(spec: &Spectrum) -> Vec<f64> {
    let mut bins = spec.bins.clone();
    fft_pass(spec.width, spec.height, &mut bins, FftDirection::Inverse);
    let norm = 1.0 / (spec.width * spec.height) as f64;
    bins.iter().map(|c| c.re * norm).collect()
}

/// Move the DC bin to the plane center: index k maps to (k + n/2) mod n on
/// each axis.
pub fn fftshift<T: Copy + Default>(width: usize, height: usize, data: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    for r in 0..height {
        let sr = (r + height / 2) % height;
        for c in 0..width {
            let sc = (c + width / 2) % width;
            out[sr * width + sc] = data[r * width + c];
        }
    }
    out
}

/// Row/column of the DC bin after [`fftshift`].
pub fn dc_bin(width: usize, height: usize) -> (usize, usize) {
    (height / 2, width / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityRange;
    use rand::{Rng, SeedableRng};

    /// Direct O(N^2) DFT, the independent oracle for fft2.
    fn naive_dft(img: &Image) -> Vec<Complex<f64>> {
        let (w, h) = (img.width(), img.height());
        let mut out = vec![Complex::default(); w * h];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let ang = -2.0 * std::f64::consts::PI
                            * (u as f64 * r as f64 / h as f64 + v as f64 * c as f64 / w as f64);
                        acc += Complex::from_polar(img.get(r, c), ang);
                    }
                }
                out[u * w + v] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_image_has_only_dc() {
        let img = Image::filled(8, 8, IntensityRange::Unit, 0.5).unwrap();
        let spec = fft2(&img);
        assert!((spec.get(0, 0).re - 0.5 * 64.0).abs() < 1e-9);
        for (i, b) in spec.bins.iter().enumerate() {
            if i != 0 {
                assert!(b.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut img = Image::zeros(8, 8, IntensityRange::Unit).unwrap();
        img.set(0, 0, 1.0);
        let spec = fft2(&img);
        for b in &spec.bins {
            assert!((b.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let img = Image::new(8, 8, IntensityRange::Unit, data).unwrap();
        let spec = fft2(&img);
        let oracle = naive_dft(&img);
        for (a, b) in spec.bins.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn round_trip_reconstructs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..24 * 16).map(|_| rng.gen::<f64>()).collect();
        let img = Image::new(24, 16, IntensityRange::Unit, data).unwrap();
        let back = ifft2_real(&fft2(&img));
        let peak = img.max();
        for (a, b) in img.pixels().iter().zip(&back) {
            assert!((a - b).abs() < 1e-9 * peak.max(1.0));
        }
    }

    #[test]
    fn shift_round_trips_dc() {
        let mut img = Image::zeros(9, 8, IntensityRange::Unit).unwrap();
        img.set(0, 0, 1.0);
        let spec = fft2(&img);
        let shifted = fftshift(9, 8, &spec.bins);
        let (dr, dc) = dc_bin(9, 8);
        assert!((shifted[dr * 9 + dc].re - 1.0).abs() < 1e-9);
    }
}
