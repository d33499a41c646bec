// Scratch: iteration-1 region-grow behavior on the denoised phantom.

use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{highpass_step, SegmentConfig};
use oct_layers::segment::regions::region_grow_from;
use oct_layers::{IntensityRange, Mask, SurfaceLabel};

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let cfg = SegmentConfig::default();
    let mask = Mask::filled(w, h, true);
    let filtered = highpass_step(
        &den,
        &mask,
        oct_layers::segment::FilterRule::DifferenceOfGaussians,
        &cfg,
    )
    .unwrap();
    let byte = filtered.rescale(IntensityRange::Byte);
    // where is the max, and how strong is the S1/S5 ridge?
    let (mut mr, mut mc, mut mv) = (0, 0, f64::MIN);
    for r in 0..h {
        for c in 0..w {
            if byte.get(r, c) > mv {
                mv = byte.get(r, c);
                mr = r;
                mc = c;
            }
        }
    }
    println!("max {mv:.1} at ({mr},{mc})");
    let s1 = out.truth.surface(SurfaceLabel::S1).unwrap();
    let s5 = out.truth.surface(SurfaceLabel::S5).unwrap();
    for c in (0..w).step_by(64) {
        let r1 = s1.rows[c].unwrap();
        let r5 = s5.rows[c].unwrap();
        let best1 = (r1.saturating_sub(8)..r1 + 9)
            .map(|r| (byte.get(r, c), r as isize - r1 as isize))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        let best5 = (r5.saturating_sub(8)..r5 + 9)
            .map(|r| (byte.get(r, c), r as isize - r5 as isize))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        println!(
            "col {c:3}: S1 ridge {:.0}@{:+} S5 ridge {:.0}@{:+}",
            best1.0, best1.1, best5.0, best5.1
        );
    }
    for seed in [245.0, 240.0] {
        for t in [233.0, 230.0, 220.0, 210.0, 200.0] {
            let grown = region_grow_from(&byte, seed, t).unwrap();
            let n: usize = (0..h)
                .map(|r| (0..w).filter(|&c| grown.get(r, c)).count())
                .sum();
            println!("seed {seed} t {t}: grown px = {n}");
        }
    }
}
