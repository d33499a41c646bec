// Scratch: timing of the full pipeline at B-scan size.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::metrics::{thickness, Layer};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::Resolution;
use std::time::Instant;

fn main() {
    let (w, h) = (1024, 496);
    let t0 = Instant::now();
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let t1 = Instant::now();
    let (den, est) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let t2 = Instant::now();
    let res = segment(&den, &SegmentConfig::default()).unwrap();
    let t3 = Instant::now();
    let pitch = Resolution::default();
    for layer in Layer::ALL {
        let (la, lb) = layer.bounds();
        let _ = thickness(res.surface(la).unwrap(), res.surface(lb).unwrap(), &pitch).unwrap();
    }
    let t4 = Instant::now();
    println!("phantom {:?} denoise {:?} (k={} a={}) segment {:?} thickness {:?} total-after-phantom {:?}",
        t1-t0, t2-t1, est.k, est.a, t3-t2, t4-t3, t4-t1);
}
