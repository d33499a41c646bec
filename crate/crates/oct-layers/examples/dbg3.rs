// Scratch: vertical profile of the denoised phantom and box-highpass response.

use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::filter::box_filter;
use oct_layers::phantom::{generate, preset};
use oct_layers::{Image, IntensityRange, SurfaceLabel};

fn main() {
    let col: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(256);
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let neg = den.map(IntensityRange::Unit, |v| 1.0 - v);
    let boxed = box_filter(&neg, 25);
    let mut marks = vec![String::new(); h];
    for &label in &SurfaceLabel::ALL {
        if let Some(r) = out.truth.surface(label).unwrap().rows[col] {
            marks[r] = format!("<-- {}", label.name());
        }
    }
    for r in 60..210 {
        let d = den.get(r, col);
        let n = neg.get(r, col);
        let hp = n - boxed.get(r, col);
        println!("r={r:3} den={d:.3} neg={n:.3} box25hp={hp:+.4} {}", marks[r]);
    }
}
