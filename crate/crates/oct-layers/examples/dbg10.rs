// Scratch: raw vs refined rows at chosen columns for one surface.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::SurfaceLabel;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "S3".into());
    let label = SurfaceLabel::parse(&which).unwrap();
    let (w, h) = (512, 256);
    let pname = std::env::args().nth(2).unwrap_or_else(|| "normal".into());
    let spec = preset(&pname, w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let mut cfg0 = SegmentConfig::default();
    cfg0.refine_radius_px = 0;
    let raw = segment(&den, &cfg0).unwrap();
    let refi = segment(&den, &SegmentConfig::default()).unwrap();
    let t = out.truth.surface(label).unwrap();
    let r = raw.surface(label).unwrap();
    let f = refi.surface(label).unwrap();
    for c in [290usize, 300, 310, 317, 325, 335, 341, 350] {
        println!(
            "c={c:3} truth={:?} raw={:?} refined={:?}",
            t.rows[c], r.rows[c], f.rows[c]
        );
    }
}
