// Scratch: per-k structural error vs actual denoising quality.

use oct_layers::denoise::wavelet::wavelet_denoise_baseline;
use oct_layers::denoise::{estimate_noise, wiener_deconvolve, DenoiseConfig};
use oct_layers::phantom::PsfBlur;
use oct_layers::filter::gaussian_psf;
use oct_layers::metrics::{cnr, foreground_mask, snr, ForegroundSpec};
use oct_layers::phantom::{generate, preset};
use oct_layers::{Image, IntensityRange, SurfaceLabel};

fn main() {
    let sigma: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(0.05);
    let psf_var: f64 = std::env::args()
        .nth(2)
        .map(|s| s.parse().unwrap())
        .unwrap_or(2.25);
    let grain: f64 = std::env::args()
        .nth(3)
        .map(|s| s.parse().unwrap())
        .unwrap_or(0.9);
    let psf_size = 2 * (3.0 * psf_var.sqrt()).ceil() as usize + 1;
    let (w, h) = (512, 256);
    let mut spec = preset("normal", w, h).unwrap();
    spec.noise_sigma = sigma;
    spec.psf_blur = Some(PsfBlur { size: psf_size, variance: psf_var });
    spec.speckle_grain_sigma = grain;
    let out = generate(&spec).unwrap();
    let byte = |img: &Image| img.map(IntensityRange::Byte, |v| v * 255.0);
    let fg = foreground_mask(
        &ForegroundSpec::default(),
        out.truth.surface(SurfaceLabel::S1).unwrap(),
        out.truth.surface(SurfaceLabel::S7).unwrap(),
        w,
        h,
    )
    .unwrap();
    match snr(&byte(&out.clean), &fg) {
        Ok(v) => println!("clean-image SNR ceiling {v:.2}"),
        Err(e) => println!("clean-image SNR: {e}"),
    }
    let stats = |img: &Image, tag: &str| {
        let b = byte(&img.rescale(IntensityRange::Unit));
        let (mut mf, mut nf) = (0.0, 0usize);
        let (mut sb, mut mb, mut nb) = (0.0, 0.0, 0usize);
        for r in 0..h {
            for c in 0..w {
                if fg.get(r, c) {
                    mf += b.get(r, c);
                    nf += 1;
                } else {
                    mb += b.get(r, c);
                    nb += 1;
                }
            }
        }
        mf /= nf as f64;
        mb /= nb as f64;
        for r in 0..h {
            for c in 0..w {
                if !fg.get(r, c) {
                    sb += (b.get(r, c) - mb).powi(2);
                }
            }
        }
        sb = (sb / nb as f64).sqrt();
        println!("  [{tag}] mu_f={mf:.1} mu_b={mb:.1} sd_b={sb:.2}");
    };
    stats(&out.clean, "clean");
    stats(&out.noisy, "noisy");
    let snr0 = snr(&byte(&out.noisy), &fg).unwrap();
    let cnr0 = cnr(&byte(&out.noisy), &fg).unwrap();
    println!("sigma={sigma} noisy SNR {snr0:.2} CNR {cnr0:.3} var={:.4}", out.noisy.variance());

    let mut cfg = DenoiseConfig::default();
    cfg.psf_size = psf_size;
    cfg.psf_variance = psf_var;
    let psf = gaussian_psf(cfg.psf_size, cfg.psf_variance).unwrap();
    let wav = wavelet_denoise_baseline(&out.noisy, 3);
    stats(&wav, "wavelet");
    let sw = snr(&byte(&wav), &fg).unwrap();
    println!("wavelet gain {:.2} dB (psf_var={psf_var} size={psf_size} grain={grain})", sw - snr0);
    let var = out.noisy.variance();
    println!("per-k quality:");
    for k in 1..=10u32 {
        let nsr = 10f64.powi(-(k as i32)) / var;
        let den = wiener_deconvolve(&out.noisy, &psf, nsr)
            .unwrap()
            .rescale(IntensityRange::Unit);
        if k <= 2 {
            stats(&den, &format!("wiener k={k}"));
            let denc = wiener_deconvolve(&out.clean, &psf, nsr).unwrap();
            stats(&denc, &format!("wiener-clean k={k}"));
            let mut sb = 0.0;
            let mut nb = 0;
            for r in 0..h {
                for c in 0..w {
                    if !fg.get(r, c) {
                        sb += (den.get(r, c) - denc.get(r, c)).powi(2);
                        nb += 1;
                    }
                }
            }
            println!("  noise-only residual sd {:.4} unit ({:.3} sigma)", (sb / nb as f64).sqrt(), (sb / nb as f64).sqrt() / 0.05);
        }
        let s = snr(&byte(&den), &fg).unwrap();
        let c = cnr(&byte(&den), &fg).unwrap();
        println!("  k={k:2} nsr={nsr:9.3e} SNR {s:6.2} (gain {:6.2}) CNR {c:6.3}", s - snr0);
    }

    for eps in [0.1, 0.15, 0.2, 0.3, 0.4] {
        cfg.rel_eps = eps;
        let est = estimate_noise(&out.noisy, &cfg).unwrap();
        let errs = est.errors_at_chosen_a();
        let e_str: Vec<String> = errs.iter().map(|e| format!("{e:.0}")).collect();
        println!(
            "rel_eps {eps:7.0e}: k={} a={} | e(k)@a: {}",
            est.k,
            est.a,
            e_str.join(" ")
        );
    }
}
