// Scratch: list worst per-column errors for one surface.
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
    let res = segment(&den, &SegmentConfig::default()).unwrap();
    let auto = res.surface(label).unwrap();
    let truth = out.truth.surface(label).unwrap();
    let mut errs: Vec<(usize, isize)> = Vec::new();
    for c in 0..w {
        if let (Some(a), Some(t)) = (auto.rows[c], truth.rows[c]) {
            let e = a as isize - t as isize;
            if e.abs() >= 4 {
                errs.push((c, e));
            }
        }
    }
    println!("{} columns with |err|>=4: {:?}", errs.len(), errs);
}
