// Scratch: per-column raw error strings for chosen surfaces.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::SurfaceLabel;

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    for radius in [0usize, 6] {
        let mut cfg = SegmentConfig::default();
        cfg.refine_radius_px = radius;
        let res = segment(&den, &cfg).unwrap();
        for &label in &[SurfaceLabel::S3, SurfaceLabel::S4, SurfaceLabel::S5, SurfaceLabel::S6] {
            let auto = res.surface(label).unwrap();
            let truth = out.truth.surface(label).unwrap();
            print!("r{radius} {:3}: ", label.name());
            for c in (0..w).step_by(8) {
                match (auto.rows[c], truth.rows[c]) {
                    (Some(a), Some(t)) => {
                        let e = a as isize - t as isize;
                        let ch = match e {
                            -2..=2 => '.',
                            3..=6 => '+',
                            -6..=-3 => '-',
                            _ if e > 6 => 'P',
                            _ => 'N',
                        };
                        print!("{ch}");
                    }
                    _ => print!("?"),
                }
            }
            println!();
        }
    }
}
