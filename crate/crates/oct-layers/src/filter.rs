//! Spatial filtering: separable convolution with replicate borders, box and
//! Gaussian smoothers, and the Gaussian PSF used by the Wiener model.

use crate::error::{OctError, Result};
use crate::image::{Image, IntensityRange};

/// 1-D Gaussian taps of the given length and sigma (pixels), normalized to
/// sum 1. The anchor sits at `len / 2`.
pub fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    assert!(len >= 1 && sigma > 0.0);
    let anchor = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - anchor;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= s;
    }
    taps
}

/// Centered, normalized 2-D Gaussian kernel with the given pixel variance.
/// Size must be odd and at least 3.
pub fn gaussian_psf(size: usize, variance: f64) -> Result<Image> {
    if size < 3 || size % 2 == 0 {
        return Err(OctError::BadKernelSize(size));
    }
    if variance <= 0.0 {
        return Err(OctError::InvalidConfig("psf variance must be > 0".into()));
    }
    let half = (size / 2) as f64;
    let mut data = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let dr = r as f64 - half;
            let dc = c as f64 - half;
            data.push((-(dr * dr + dc * dc) / (2.0 * variance)).exp());
        }
    }
    let s: f64 = data.iter().sum();
    for v in &mut data {
        *v /= s;
    }
    Ok(Image::from_kernel_parts(size, size, data))
}

/// Horizontal then vertical 1-D convolution with replicate edges.
pub fn convolve_separable(img: &Image, kx: &[f64], ky: &[f64]) -> Image {
    let (w, h) = (img.width(), img.height());
    let ax = (kx.len() / 2) as isize;
    let ay = (ky.len() / 2) as isize;
    let src = img.pixels();
    let mut tmp = vec![0.0f64; w * h];
    for r in 0..h {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for (i, &t) in kx.iter().enumerate() {
                let cc = (c + i as isize - ax).clamp(0, w as isize - 1) as usize;
                acc += t * src[r * w + cc];
            }
            tmp[r * w + c as usize] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for r in 0..h as isize {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, &t) in ky.iter().enumerate() {
                let rr = (r + i as isize - ay).clamp(0, h as isize - 1) as usize;
                acc += t * tmp[rr * w + c];
            }
            out[r as usize * w + c] = acc;
        }
    }
    Image::from_kernel_parts(w, h, out)
}

/// Full 2-D convolution with replicate edges (used for small kernels only).
pub fn convolve_full(img: &Image, kernel: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let (kw, kh) = (kernel.width(), kernel.height());
    let (ax, ay) = ((kw / 2) as isize, (kh / 2) as isize);
    let mut out = vec![0.0f64; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for kr in 0..kh as isize {
                for kc in 0..kw as isize {
                    let rr = (r + kr - ay).clamp(0, h as isize - 1) as usize;
                    let cc = (c + kc - ax).clamp(0, w as isize - 1) as usize;
                    acc += kernel.get(kr as usize, kc as usize) * img.get(rr, cc);
                }
            }
            out[(r * w as isize + c) as usize] = acc;
        }
    }
    Image::from_kernel_parts(w, h, out)
}

/// Mean filter over a size x size window, replicate borders.
pub fn box_filter(img: &Image, size: usize) -> Image {
    assert!(size >= 1);
    let taps = vec![1.0 / size as f64; size];
    convolve_separable(img, &taps, &taps)
}

/// Separable 2-D Gaussian smoother with per-axis sigmas (pixels).
pub fn gauss_filter(img: &Image, size: usize, sigma_x: f64, sigma_y: f64) -> Image {
    assert!(size >= 1);
    convolve_separable(
        img,
        &gaussian_taps(size, sigma_x),
        &gaussian_taps(size, sigma_y),
    )
}

impl Image {
    /// Internal constructor for filter outputs and kernels; skips the
    /// minimum-dimension check and tags the result as unit-range.
    pub(crate) fn from_kernel_parts(width: usize, height: usize, data: Vec<f64>) -> Image {
        assert_eq!(data.len(), width * height);
        Image::assemble(width, height, IntensityRange::Unit, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn psf_even_size_rejected() {
        assert!(gaussian_psf(4, 1e-3).is_err());
        assert!(gaussian_psf(1, 1e-3).is_err());
    }

    #[test]
    fn psf_sums_to_one() {
        for (size, var) in [(3, 1e-3), (5, 0.5), (7, 2.0), (9, 10.0)] {
            let k = gaussian_psf(size, var).unwrap();
            let s: f64 = k.pixels().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psf_flat_limit() {
        let k = gaussian_psf(3, 1e12).unwrap();
        for &v in k.pixels() {
            assert!((v - 1.0 / 9.0).abs() < 1e-6);
        }
    }

    #[test]
    fn psf_matches_closed_form() {
        let var = 0.8;
        let k = gaussian_psf(5, var).unwrap();
        let mut expected = Vec::new();
        for r in 0..5i32 {
            for c in 0..5i32 {
                let (dr, dc) = ((r - 2) as f64, (c - 2) as f64);
                expected.push((-(dr * dr + dc * dc) / (2.0 * var)).exp());
            }
        }
        let s: f64 = expected.iter().sum();
        for (a, e) in k.pixels().iter().zip(&expected) {
            assert!((a - e / s).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_unchanged_by_box() {
        let img = Image::filled(10, 10, IntensityRange::Unit, 0.3).unwrap();
        let out = box_filter(&img, 5);
        for &v in out.pixels() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_through_box_is_plateau() {
        let mut img = Image::zeros(9, 9, IntensityRange::Unit).unwrap();
        img.set(4, 4, 1.0);
        let out = box_filter(&img, 3);
        for r in 0..9 {
            for c in 0..9 {
                let expect = if (3..=5).contains(&r) && (3..=5).contains(&c) {
                    1.0 / 9.0
                } else {
                    0.0
                };
                assert!((out.get(r, c) - expect).abs() < 1e-12);
            }
        }
    }

    /// Direct sliding-window oracle with clamped coordinates.
    fn naive_box(img: &Image, size: usize) -> Vec<f64> {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let half = (size / 2) as isize;
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dr in -half..=(size as isize - 1 - half) {
                    for dc in -half..=(size as isize - 1 - half) {
                        let rr = (r + dr).clamp(0, h - 1);
                        let cc = (c + dc).clamp(0, w - 1);
                        acc += img.get(rr as usize, cc as usize);
                    }
                }
                out.push(acc / (size * size) as f64);
            }
        }
        out
    }

    #[test]
    fn box_matches_naive_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let img = Image::new(10, 10, IntensityRange::Unit, data).unwrap();
        let out = box_filter(&img, 5);
        let oracle = naive_box(&img, 5);
        for (a, b) in out.pixels().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_is_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xa: Vec<f64> = (0..144).map(|_| rng.gen::<f64>()).collect();
        let xb: Vec<f64> = (0..144).map(|_| rng.gen::<f64>()).collect();
        let a = Image::new(12, 12, IntensityRange::Unit, xa.clone()).unwrap();
        let b = Image::new(12, 12, IntensityRange::Unit, xb.clone()).unwrap();
        let combo: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| 2.0 * p - 0.5 * q).collect();
        let c = Image::new(12, 12, IntensityRange::Unit, combo).unwrap();
        let fa = gauss_filter(&a, 7, 1.5, 1.5);
        let fb = gauss_filter(&b, 7, 1.5, 1.5);
        let fc = gauss_filter(&c, 7, 1.5, 1.5);
        for i in 0..144 {
            let expect = 2.0 * fa.pixels()[i] - 0.5 * fb.pixels()[i];
            assert!((fc.pixels()[i] - expect).abs() < 1e-9);
        }
    }
}
