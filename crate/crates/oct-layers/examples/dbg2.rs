// Scratch: per-iteration segmentation diagnostics on the normal phantom.

use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::regions::connected_components;
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::SurfaceLabel;

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let mut cfg = SegmentConfig::default();
    cfg.keep_diagnostics = true;
    let res = segment(&den, &cfg).unwrap();
    for d in &res.per_iteration {
        println!("== iter {} regions_used={} exception={}", d.index, d.regions_used, d.exception_fired);
        if let Some(bin) = &d.binary {
            let mut regs = connected_components(bin);
            regs.sort_by(|a, b| b.area.cmp(&a.area));
            for reg in regs.iter().take(6) {
                println!(
                    "   region area={} rows {}.. cols {}..{} major={:.0}",
                    reg.area,
                    reg.min_row,
                    reg.min_col,
                    reg.max_col,
                    reg.major_axis_length
                );
            }
            if regs.len() > 6 {
                println!("   (+{} more)", regs.len() - 6);
            }
        }
    }
    for d in &res.per_iteration {
        if d.index == 2 {
            let f = d.filtered.as_ref().unwrap();
            let b = d.binary.as_ref().unwrap();
            for col in [64usize, 256] {
                println!("iter2 col {col}:");
                for r in 130..190 {
                    println!("  r={r:3} f={:+.4} bin={}", f.get(r, col), b.get(r, col) as u8);
                }
            }
        }
    }
    for &label in &SurfaceLabel::ALL {
        let auto = res.surface(label).unwrap();
        let truth = out.truth.surface(label).unwrap();
        print!("{:8}", label.name());
        for c in (0..w).step_by(64) {
            match (auto.rows[c], truth.rows[c]) {
                (Some(a), Some(t)) => print!(" {:+4}", a as isize - t as isize),
                (None, _) => print!("    ."),
                _ => print!("    ?"),
            }
        }
        println!();
    }
}
