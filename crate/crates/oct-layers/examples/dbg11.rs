// Scratch: slope/intercept of auto-vs-truth thickness per layer.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::metrics::{thickness, Layer};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::Resolution;

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let res = segment(&den, &SegmentConfig::default()).unwrap();
    let pitch = Resolution::default();
    for layer in Layer::ALL {
        let (la, lb) = layer.bounds();
        let auto = thickness(res.surface(la).unwrap(), res.surface(lb).unwrap(), &pitch).unwrap();
        let truth = thickness(out.truth.surface(la).unwrap(), out.truth.surface(lb).unwrap(), &pitch).unwrap();
        let pairs: Vec<(f64, f64)> = auto.per_column_um.iter().zip(&truth.per_column_um)
            .filter_map(|(a, t)| match (a, t) { (Some(a), Some(t)) => Some((*a, *t)), _ => None }).collect();
        let n = pairs.len() as f64;
        let (ma, mt) = (pairs.iter().map(|p| p.0).sum::<f64>()/n, pairs.iter().map(|p| p.1).sum::<f64>()/n);
        let cov = pairs.iter().map(|p| (p.0-ma)*(p.1-mt)).sum::<f64>()/n;
        let vt = pairs.iter().map(|p| (p.1-mt)*(p.1-mt)).sum::<f64>()/n;
        let va = pairs.iter().map(|p| (p.0-ma)*(p.0-ma)).sum::<f64>()/n;
        println!("{:8} slope={:+.3} sd_truth={:.2} sd_auto={:.2} resid_sd={:.2}",
            layer.name(), cov/vt, vt.sqrt(), va.sqrt(),
            (va - cov*cov/vt).max(0.0).sqrt());
    }
}
