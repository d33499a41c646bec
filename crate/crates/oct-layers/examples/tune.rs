// Scratch harness for inspecting phantom segmentation behavior.

use oct_layers::denoise::{denoise, DenoiseConfig};
use oct_layers::metrics::{
    agreement, cnr, foreground_mask, snr, surface_error, thickness, ForegroundSpec, Layer,
};
use oct_layers::phantom::{generate, preset};
use oct_layers::segment::{segment, SegmentConfig};
use oct_layers::{Image, IntensityRange, Resolution, SurfaceLabel};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "normal".into());
    let w: usize = std::env::args()
        .nth(2)
        .map(|s| s.parse().unwrap())
        .unwrap_or(512);
    let h: usize = std::env::args()
        .nth(3)
        .map(|s| s.parse().unwrap())
        .unwrap_or(256);
    let spec = preset(&name, w, h).unwrap();
    let out = generate(&spec).unwrap();
    let t0 = std::time::Instant::now();
    let (den, est) = denoise(&out.noisy, &DenoiseConfig::default()).unwrap();
    println!(
        "denoise: k={} a={} nsr={:.3e}  ({:.2?})",
        est.k,
        est.a,
        est.nsr,
        t0.elapsed()
    );

    let fgspec = ForegroundSpec::default();
    let s1 = out.truth.surface(SurfaceLabel::S1).unwrap();
    let s7 = out.truth.surface(SurfaceLabel::S7).unwrap();
    let fg = foreground_mask(&fgspec, s1, s7, w, h).unwrap();
    let byte = |img: &Image| img.map(IntensityRange::Byte, |v| v * 255.0);
    let snr_noisy = snr(&byte(&out.noisy), &fg).unwrap();
    let snr_den = snr(&byte(&den), &fg).unwrap();
    let cnr_noisy = cnr(&byte(&out.noisy), &fg).unwrap();
    let cnr_den = cnr(&byte(&den), &fg).unwrap();
    println!(
        "SNR {snr_noisy:.2} -> {snr_den:.2} (gain {:.2} dB)  CNR {cnr_noisy:.3} -> {cnr_den:.3}",
        snr_den - snr_noisy
    );

    let wav = oct_layers::denoise::wavelet::wavelet_denoise_baseline(&out.noisy, 3);
    let snr_wav = snr(&byte(&wav), &fg).unwrap();
    println!("wavelet SNR gain {:.2} dB", snr_wav - snr_noisy);

    let t1 = std::time::Instant::now();
    let mut cfg = SegmentConfig::default();
    cfg.keep_diagnostics = true;
    match segment(&den, &cfg) {
        Ok(res) => {
            println!("segment ok ({:.2?}), ordering={}", t1.elapsed(), res.ordering_holds());
            for d in &res.per_iteration {
                println!(
                    "  iter {}: regions={} exception={}",
                    d.index, d.regions_used, d.exception_fired
                );
            }
            let resn = Resolution::default();
            for &label in &SurfaceLabel::ALL {
                let auto = res.surface(label).unwrap();
                match surface_error(auto, out.truth.surface(label).unwrap(), &resn) {
                    Ok(e) => println!(
                        "  {}: mean {:.2} um ({:.2} px), sd {:.2}, cov {:.2}",
                        label.name(),
                        e.mean_um,
                        e.mean_um / resn.axial_um_per_px,
                        e.sd_um,
                        auto.coverage()
                    ),
                    Err(e) => println!("  {}: ERR {e}", label.name()),
                }
            }
            for layer in Layer::ALL {
                let (a, b) = layer.bounds();
                let auto_t = thickness(res.surface(a).unwrap(), res.surface(b).unwrap(), &resn);
                let truth_t = thickness(
                    out.truth.surface(a).unwrap(),
                    out.truth.surface(b).unwrap(),
                    &resn,
                );
                match (auto_t, truth_t) {
                    (Ok(at), Ok(tt)) => {
                        let ag = agreement(&at, &tt);
                        println!(
                            "  layer {}: auto {:.1}+-{:.1} truth {:.1}+-{:.1} r={:?}",
                            layer.name(),
                            at.mean_um,
                            at.sd_um,
                            tt.mean_um,
                            tt.sd_um,
                            ag.map(|a| (a.r, a.r2)).map_err(|e| e.to_string())
                        );
                    }
                    (a, b) => println!("  layer {}: {:?} {:?}", layer.name(), a.is_ok(), b.is_ok()),
                }
            }
        }
        Err(e) => println!("segment FAILED: {e}"),
    }
}
