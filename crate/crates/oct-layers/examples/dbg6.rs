// Scratch: raw vs refined trace errors per surface.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::SurfaceLabel;

fn main() {
    let (w, h) = (512, 256);
    let name = std::env::args().nth(1).unwrap_or_else(|| "normal".into());
    let spec = preset(&name, w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    for radius in [0usize, SegmentConfig::default().refine_radius_px] {
        let mut cfg = SegmentConfig::default();
        cfg.refine_radius_px = radius;
        let res = segment(&den, &cfg).unwrap();
        println!("refine radius {radius}:");
        for &label in &SurfaceLabel::SURFACES {
            let auto = res.surface(label).unwrap();
            let truth = out.truth.surface(label).unwrap();
            let mut errs: Vec<f64> = Vec::new();
            for c in 0..w {
                if let (Some(a), Some(t)) = (auto.rows[c], truth.rows[c]) {
                    errs.push(a as f64 - t as f64);
                }
            }
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let mab = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
            let max = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            println!(
                "  {:3} n={} mean={:+.2} meanabs={:.2} maxabs={:.0}",
                label.name(), errs.len(), mean, mab, max
            );
        }
    }
}
