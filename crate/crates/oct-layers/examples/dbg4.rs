// Scratch: step through iterations manually with verbose stats.
use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::*;
use oct_layers::segment::regions::connected_components;
use oct_layers::{Image, IntensityRange, Mask, SurfaceLabel};
use oct_layers::trace::SurfaceTrace;

fn main() {
    let (w, h) = (512, 256);
    let spec = preset("normal", w, h).unwrap();
    let out = generate(&spec).unwrap();
    let (den, _) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    let cfg = SegmentConfig::default();
    let negative = den.map(IntensityRange::Unit, |v| 1.0 - v);
    let mut surfaces: Vec<SurfaceTrace> = Vec::new();
    for spec_it in iteration_table(&cfg) {
        let src: &Image = match spec_it.source {
            SourceSelector::Denoised => &den,
            SourceSelector::Negative => &negative,
        };
        let (mask, select_mask) = match spec_it.mask_rule {
            MaskRule::WholeImage => {
                let m = Mask::filled(w, h, true);
                (m.clone(), m)
            }
            MaskRule::Between(a, b) => {
                let up = surfaces.iter().find(|t| t.label == a).unwrap().clone();
                let loo = surfaces.iter().find(|t| t.label == b).unwrap().clone();
                (
                    mask_between(&up, &loo, w, h, spec_it.pad_bottom + spec_it.pad_bottom_context, spec_it.pad_top, 0, 0).unwrap(),
                    mask_between(&up, &loo, w, h, spec_it.pad_bottom, 0, spec_it.guard_bottom, spec_it.guard_top).unwrap(),
                )
            }
        };
        let filtered = highpass_step(src, &mask, spec_it.filter_rule, &cfg).unwrap();
        // stats of filtered inside select mask
        let mut vals: Vec<f64> = Vec::new();
        for r in 0..h { for c in 0..w { if select_mask.get(r, c) { vals.push(filtered.get(r, c)); } } }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| vals[((vals.len()-1) as f64 * p) as usize];
        println!("== iter {}: filtered in-band min {:.4} p25 {:.4} med {:.4} p75 {:.4} p95 {:.4} max {:.4}",
            spec_it.index, q(0.0), q(0.25), q(0.5), q(0.75), q(0.95), q(1.0));
        // column profile at 256 for iterations 4,5,6
        if spec_it.index >= 4 {
            let c = 256;
            let mut rows: Vec<usize> = (0..h).filter(|&r| select_mask.get(r, c)).collect();
            let lo = *rows.first().unwrap_or(&0); let hi = *rows.last().unwrap_or(&0);
            rows.clear();
            print!("   col256 band {}..{}: ", lo, hi);
            for r in lo..=hi { print!("{:+.3} ", filtered.get(r, c)); }
            println!();
        }
        let binary = match spec_it.threshold_rule {
            ThresholdRule::OtsuAbove => {
                let t = {
                    // replicate rescale+otsu to print threshold
                    let byte = {
                        let mut lov = f64::INFINITY; let mut hiv = f64::NEG_INFINITY;
                        for r in 0..h { for c in 0..w { if select_mask.get(r,c) { lov=lov.min(filtered.get(r,c)); hiv=hiv.max(filtered.get(r,c)); } } }
                        println!("   rescale lo {:.4} hi {:.4}", lov, hiv);
                        filtered.map(IntensityRange::Byte, |v| if hiv>lov {(v-lov)/(hiv-lov)*255.0} else {0.0})
                    };
                    let t = otsu_threshold(&byte, &select_mask).unwrap();
                    println!("   otsu byte threshold {}", t);
                    t
                };
                let _ = t;
                threshold_step(&filtered, &select_mask, spec_it.threshold_rule, &cfg, spec_it.index)
            }
            _ => threshold_step(&filtered, &select_mask, spec_it.threshold_rule, &cfg, spec_it.index),
        };
        let binary = match binary { Ok(b) => b, Err(e) => { println!("   threshold failed: {e:?}"); return; } };
        if spec_it.index == 4 || spec_it.index == 5 {
            let lbl = if spec_it.index == 4 { SurfaceLabel::S4 } else { SurfaceLabel::S3 };
            let truth4 = out.truth.surface(lbl).unwrap();
            for c in (0..512).step_by(16) {
                let on: Vec<usize> = (0..h).filter(|&r| binary.get(r, c)).collect();
                let bot = on.last().cloned();
                println!(
                    "   S4cov c={c:3} truth={:?} binbot={:?} err={:?}",
                    truth4.rows[c],
                    bot,
                    bot.and_then(|b| truth4.rows[c].map(|t| b as isize - t as isize))
                );
            }
        }
        if spec_it.index == 12 {
            for c in (120..260).step_by(8) {
                let band: Vec<usize> = (0..h).filter(|&r| select_mask.get(r, c)).collect();
                let on: Vec<usize> = (0..h).filter(|&r| binary.get(r, c)).collect();
                println!(
                    "   c={c:3} band {}..{} on={:?}",
                    band.first().unwrap_or(&0),
                    band.last().unwrap_or(&0),
                    on
                );
            }
        }
        let mut regs = connected_components(&binary);
        regs.sort_by(|a, b| b.area.cmp(&a.area));
        for reg in regs.iter().take(5) {
            println!("   region area={} rows {}..{} cols {}..{}", reg.area, reg.min_row, reg.max_row, reg.min_col, reg.max_col);
        }
        let s1_extent = surfaces.iter().find(|t| t.label == SurfaceLabel::S1).map(|t| t.x_extent()).unwrap_or(w);
        let merge_gap = match spec_it.index { 2 => Some(cfg.complex_merge_gap_px), 4 => Some(cfg.s4_merge_gap_px), 5 => Some(cfg.s3_merge_gap_px), _ => None };
        let selection = match select_regions_with_merge(&binary, spec_it.criterion, s1_extent, cfg.min_region_px, spec_it.index, merge_gap, (spec_it.index == 2).then_some((&filtered, cfg.merge_strength_frac))) {
            Ok(s) => s, Err(e) => { println!("   select failed: {e:?}"); return; }
        };
        println!("   regions_used {} exception {}", selection.regions_used, selection.exception_fired);
        for &(side, label) in spec_it.outputs {
            let trace = trace_surface(&selection.mask, side, label);
            println!("   {} trace col256 = {:?}, truth {:?}", label.name(), trace.rows[256], out.truth.surface(label).unwrap().rows[256]);
            surfaces.push(trace);
        }
    }
}
