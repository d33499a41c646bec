// Scratch: exception-rule diagnostics on the foveal preset.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::SurfaceLabel;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "foveal".into());
    let (w, h) = (512, 256);
    let spec = preset(&name, w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let mut cfg = SegmentConfig::default();
    cfg.keep_diagnostics = true;
    let res = segment(&den, &cfg).unwrap();
    for d in &res.per_iteration {
        println!("iter {} regions_used={} exception={}", d.index, d.regions_used, d.exception_fired);
    }
    for &label in &SurfaceLabel::SURFACES {
        let auto = res.surface(label).unwrap();
        let truth = out.truth.surface(label).unwrap();
        let mut errs: Vec<f64> = Vec::new();
        for c in 0..w {
            if let (Some(a), Some(t)) = (auto.rows[c], truth.rows[c]) {
                errs.push(a as f64 - t as f64);
            }
        }
        let n = errs.len().max(1) as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let mab = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
        let max = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        println!("  {:3} n={} cov={:.2} mean={:+.2} meanabs={:.2} maxabs={:.0}",
            label.name(), errs.len(), auto.coverage(), mean, mab, max);
    }
}
