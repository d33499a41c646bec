// Scratch: per-layer thickness agreement on phantoms.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::metrics::{agreement, thickness, Layer};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::Resolution;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "normal".into());
    let (w, h) = (512, 256);
    let spec = preset(&name, w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let res = segment(&den, &SegmentConfig::default()).unwrap();
    let pitch = Resolution::default();
    for layer in Layer::ALL {
        let (la, lb) = layer.bounds();
        let auto = thickness(
            res.surface(la).unwrap(),
            res.surface(lb).unwrap(),
            &pitch,
        );
        let truth = thickness(
            out.truth.surface(la).unwrap(),
            out.truth.surface(lb).unwrap(),
            &pitch,
        )
        .unwrap();
        match auto {
            Ok(auto) => {
                let a = agreement(&auto, &truth).unwrap();
                println!(
                    "{:8} r={:+.4} r2={:.4} mean_err_um={:+.3}",
                    layer.name(),
                    a.r,
                    a.r2,
                    auto.mean_um - truth.mean_um
                );
            }
            Err(e) => println!("{:8} thickness failed: {e:?}", layer.name()),
        }
    }
}
