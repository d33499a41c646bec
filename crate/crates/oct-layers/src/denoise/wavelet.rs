//! Wavelet soft-threshold baseline denoiser.
//!
//! Separable periodized Daubechies-4-tap decomposition, universal threshold
//! from the median absolute deviation of the finest diagonal subband, soft
//! shrinkage of every detail subband, inverse transform.

use crate::image::{Image, IntensityRange};

// Daubechies db2 analysis low-pass taps.
const H: [f64; 4] = [
    0.482962913144690,  // (1+sqrt3)/(4 sqrt2)
    0.836516303737469,  // (3+sqrt3)/(4 sqrt2)
    0.224143868041857,  // (3-sqrt3)/(4 sqrt2)
    -0.129409522550921, // (1-sqrt3)/(4 sqrt2)
];

fn g_tap(j: usize) -> f64 {
    // quadrature mirror: g[j] = (-1)^j h[3-j]
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign * H[3 - j]
}

/// One periodized analysis step; `x.len()` must be even.
fn dwt_step(x: &[f64], approx: &mut [f64], detail: &mut [f64]) {
    let n = x.len();
    for i in 0..n / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for j in 0..4 {
            let idx = (2 * i + j) % n;
            a += H[j] * x[idx];
            d += g_tap(j) * x[idx];
        }
        approx[i] = a;
        detail[i] = d;
    }
}

/// Inverse of [`dwt_step`].
fn idwt_step(approx: &[f64], detail: &[f64], x: &mut [f64]) {
    let n = x.len();
    x.fill(0.0);
    for i in 0..n / 2 {
        for j in 0..4 {
            let idx = (2 * i + j) % n;
            x[idx] += H[j] * approx[i] + g_tap(j) * detail[i];
        }
    }
}

/// In-place 2-D multi-level transform over the top-left `w x h` active block
/// of `data` (row-major over full `stride`). After each level the active
/// block halves; subbands lie in the standard [LL LH; HL HH] layout.
fn dwt2_forward(data: &mut [f64], stride: usize, mut w: usize, mut h: usize, levels: usize) {
    let mut row = vec![0.0f64; w.max(h)];
    let mut approx = vec![0.0f64; w.max(h) / 2];
    let mut detail = vec![0.0f64; w.max(h) / 2];
    for _ in 0..levels {
        for r in 0..h {
            row[..w].copy_from_slice(&data[r * stride..r * stride + w]);
            dwt_step(&row[..w], &mut approx[..w / 2], &mut detail[..w / 2]);
            data[r * stride..r * stride + w / 2].copy_from_slice(&approx[..w / 2]);
            data[r * stride + w / 2..r * stride + w].copy_from_slice(&detail[..w / 2]);
        }
        for c in 0..w {
            for (i, slot) in row[..h].iter_mut().enumerate() {
                *slot = data[i * stride + c];
            }
            dwt_step(&row[..h], &mut approx[..h / 2], &mut detail[..h / 2]);
            for i in 0..h / 2 {
                data[i * stride + c] = approx[i];
                data[(i + h / 2) * stride + c] = detail[i];
            }
        }
        w /= 2;
        h /= 2;
    }
}

fn dwt2_inverse(data: &mut [f64], stride: usize, full_w: usize, full_h: usize, levels: usize) {
    let mut row = vec![0.0f64; full_w.max(full_h)];
    let mut approx = vec![0.0f64; full_w.max(full_h) / 2];
    let mut detail = vec![0.0f64; full_w.max(full_h) / 2];
    for level in (0..levels).rev() {
        let w = full_w >> level;
        let h = full_h >> level;
        for c in 0..w {
            for i in 0..h / 2 {
                approx[i] = data[i * stride + c];
                detail[i] = data[(i + h / 2) * stride + c];
            }
            idwt_step(&approx[..h / 2], &detail[..h / 2], &mut row[..h]);
            for (i, &v) in row[..h].iter().enumerate() {
                data[i * stride + c] = v;
            }
        }
        for r in 0..h {
            approx[..w / 2].copy_from_slice(&data[r * stride..r * stride + w / 2]);
            detail[..w / 2].copy_from_slice(&data[r * stride + w / 2..r * stride + w]);
            idwt_step(&approx[..w / 2], &detail[..w / 2], &mut row[..w]);
            data[r * stride..r * stride + w].copy_from_slice(&row[..w]);
        }
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn next_multiple(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Soft-threshold wavelet shrinkage. `threshold_override` of `Some(t)` forces
/// the shrinkage threshold (0 reproduces the input exactly); `None` uses the
/// universal threshold `sigma * sqrt(2 ln N)` with sigma estimated from the
/// finest diagonal subband.
pub fn wavelet_denoise_with_threshold(
    img: &Image,
    levels: usize,
    threshold_override: Option<f64>,
) -> Image {
    assert!(levels >= 1);
    let block = 1usize << levels;
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (next_multiple(w, block), next_multiple(h, block));

    // replicate-pad to a transformable size
    let mut data = vec![0.0f64; pw * ph];
    for r in 0..ph {
        let sr = r.min(h - 1);
        for c in 0..pw {
            let sc = c.min(w - 1);
            data[r * pw + c] = img.get(sr, sc);
        }
    }

    dwt2_forward(&mut data, pw, pw, ph, levels);

    let threshold = threshold_override.unwrap_or_else(|| {
        // finest diagonal subband HH1: rows ph/2.., cols pw/2..
        let mut hh = Vec::with_capacity((pw / 2) * (ph / 2));
        for r in ph / 2..ph {
            for c in pw / 2..pw {
                hh.push(data[r * pw + c].abs());
            }
        }
        let sigma = median(hh) / 0.6745;
        sigma * (2.0 * ((w * h) as f64).ln()).sqrt()
    });

    if threshold > 0.0 {
        // shrink every detail coefficient; the coarsest LL block is kept
        let ll_w = pw >> levels;
        let ll_h = ph >> levels;
        for r in 0..ph {
            for c in 0..pw {
                if r < ll_h && c < ll_w {
                    continue;
                }
                data[r * pw + c] = soft(data[r * pw + c], threshold);
            }
        }
    }

    dwt2_inverse(&mut data, pw, pw, ph, levels);

    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        out.extend_from_slice(&data[r * pw..r * pw + w]);
    }
    Image::assemble(w, h, IntensityRange::Unit, out)
}

/// Baseline wavelet denoiser with the universal threshold.
pub fn wavelet_denoise_baseline(img: &Image, levels: usize) -> Image {
    wavelet_denoise_with_threshold(img, levels, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_image_stays_zero() {
        let img = Image::zeros(16, 16, IntensityRange::Unit).unwrap();
        let out = wavelet_denoise_baseline(&img, 3);
        assert!(out.pixels().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_threshold_is_perfect_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // non-multiple-of-8 size exercises the padding path
        let data: Vec<f64> = (0..21 * 13).map(|_| rng.gen::<f64>()).collect();
        let img = Image::assemble(21, 13, IntensityRange::Unit, data);
        let out = wavelet_denoise_with_threshold(&img, 3, Some(0.0));
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shrinkage_reduces_mse_on_noisy_piecewise_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (w, h) = (64, 64);
        let clean: Vec<f64> = (0..w * h)
            .map(|i| if (i / w) < 32 { 0.2 } else { 0.8 })
            .collect();
        let noisy: Vec<f64> = clean
            .iter()
            .map(|&v| {
                v + 0.1
                    * (rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>()
                        - 2.0)
            })
            .collect();
        let img = Image::new(w, h, IntensityRange::Unit, noisy.clone()).unwrap();
        let out = wavelet_denoise_baseline(&img, 3);
        let mse = |x: &[f64]| -> f64 {
            x.iter()
                .zip(&clean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / clean.len() as f64
        };
        assert!(mse(out.pixels()) < mse(&noisy));
    }
}
