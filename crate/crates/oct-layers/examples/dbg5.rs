// Scratch: iter-1 ridge bytes and iter-2 response profile under new palette.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::filter::{box_filter, convolve_separable, gaussian_taps};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::*;
use oct_layers::{Image, IntensityRange, Mask, SurfaceLabel};

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let cfg = SegmentConfig::default();
    // iteration 1 response -> smoothed, clipped byte image
    let mask = Mask::filled(w, h, true);
    let filtered = highpass_step(&den, &mask, FilterRule::DifferenceOfGaussians, &cfg).unwrap();
    let row_taps = gaussian_taps(cfg.ridge_smooth_len, cfg.ridge_smooth_sigma);
    let smooth = convolve_separable(&filtered, &row_taps, &[1.0]);
    let mut vals: Vec<f64> = smooth.pixels().to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = vals[0];
    let hi = vals[((vals.len() - 1) as f64 * cfg.ridge_clip_pct / 100.0).round() as usize].max(lo + 1e-12);
    let byte = smooth.map(IntensityRange::Byte, |v| 255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0));
    for col in [64usize, 256, 448] {
        let s1 = out.truth.surface(SurfaceLabel::S1).unwrap().rows[col].unwrap();
        let s5 = out.truth.surface(SurfaceLabel::S5).unwrap().rows[col].unwrap();
        let s7 = out.truth.surface(SurfaceLabel::S7).unwrap().rows[col].unwrap();
        let b1: Vec<i32> = (s1.saturating_sub(4)..s1 + 5).map(|r| byte.get(r, col) as i32).collect();
        let b5: Vec<i32> = (s5.saturating_sub(4)..s7 + 3).map(|r| byte.get(r, col) as i32).collect();
        println!("col {col}: S1 ridge bytes {:?}", b1);
        println!("         complex bytes (S5-4..S7+2) {:?}", b5);
    }
    // iteration 2 response at col 256 with true-ish mask
    let den_neg = den.map(IntensityRange::Unit, |v| 1.0 - v);
    let s1t = out.truth.surface(SurfaceLabel::S1).unwrap().clone();
    let cht = out.truth.surface(SurfaceLabel::Choroid).unwrap().clone();
    let m2 = mask_between(&s1t, &cht, w, h, 0, 0, 0).unwrap();
    let masked = {
        let mut m = den_neg.clone();
        for r in 0..h { for c in 0..w { if !m2.get(r, c) { m.set(r, c, 0.0); } } }
        m
    };
    let blurred = box_filter(&masked, 25);
    let col = 256;
    let s1 = s1t.rows[col].unwrap();
    println!("iter2 profile col 256 (S1 at {s1}):");
    for r in s1.saturating_sub(2)..s1 + 60 {
        println!("  r={r:3} den={:.3} neg={:.3} resp={:+.4}", den.get(r, col), den_neg.get(r, col), masked.get(r, col) - blurred.get(r, col));
    }
}
