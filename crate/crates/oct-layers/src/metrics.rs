//! Image-quality metrics (SNR, CNR, PSNR), surface-error statistics and
//! layer-thickness profiles with agreement statistics (Pearson r, R²).

use serde::{Deserialize, Serialize};

use crate::error::{OctError, Result};
use crate::image::{to_um, Image, Mask, Resolution};
use crate::trace::{SurfaceLabel, SurfaceTrace};

/// Margins of the retinal foreground band relative to S1 and S7.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForegroundSpec {
    /// Pixels above Surface 1.
    pub top_margin: usize,
    /// Pixels below Surface 7.
    pub bottom_margin: usize,
}

impl Default for ForegroundSpec {
    fn default() -> Self {
        ForegroundSpec {
            top_margin: 10,
            bottom_margin: 50,
        }
    }
}

/// Foreground band: per column, rows from `S1 - top_margin` through
/// `S7 + bottom_margin`, clamped to the image. Background is the complement.
pub fn foreground_mask(
    spec: &ForegroundSpec,
    s1: &SurfaceTrace,
    s7: &SurfaceTrace,
    width: usize,
    height: usize,
) -> Result<Mask> {
    let top = s1
        .interpolate_full()
        .ok_or(OctError::EmptyRegionOfInterest(0))?;
    let bottom = s7
        .interpolate_full()
        .ok_or(OctError::EmptyRegionOfInterest(0))?;
    let mut mask = Mask::filled(width, height, false);
    for c in 0..width.min(top.len()) {
        let r0 = (top[c].round() as isize - spec.top_margin as isize).max(0) as usize;
        let r1 = ((bottom[c].round() as isize + spec.bottom_margin as isize).max(0) as usize)
            .min(height.saturating_sub(1));
        for r in r0..=r1 {
            mask.set(r, c, true);
        }
    }
    Ok(mask)
}

fn region_stats(img: &Image, mask: &Mask, inside: bool) -> (f64, f64, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in 0..img.height() {
        for c in 0..img.width() {
            if mask.get(r, c) == inside {
                sum += img.get(r, c);
                n += 1;
            }
        }
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for r in 0..img.height() {
        for c in 0..img.width() {
            if mask.get(r, c) == inside {
                let d = img.get(r, c) - mean;
                ss += d * d;
            }
        }
    }
    // population sd
    (mean, (ss / n as f64).sqrt(), n)
}

/// Global signal-to-noise ratio `20 log10(mu_f / sigma_b)` in dB.
pub fn snr(img: &Image, fg: &Mask) -> Result<f64> {
    fg.matches(img)?;
    let (mu_f, _, nf) = region_stats(img, fg, true);
    let (_, sd_b, nb) = region_stats(img, fg, false);
    if nf == 0 || nb == 0 {
        return Err(OctError::EmptyRegionOfInterest(0));
    }
    if sd_b == 0.0 {
        return Err(OctError::NoiseFreeBackground);
    }
    Ok(20.0 * (mu_f / sd_b).log10())
}

/// Global contrast-to-noise ratio `|mu_f - mu_b| / sqrt(0.5 (sd_f^2 + sd_b^2))`.
pub fn cnr(img: &Image, fg: &Mask) -> Result<f64> {
    fg.matches(img)?;
    let (mu_f, sd_f, nf) = region_stats(img, fg, true);
    let (mu_b, sd_b, nb) = region_stats(img, fg, false);
    if nf == 0 || nb == 0 {
        return Err(OctError::EmptyRegionOfInterest(0));
    }
    let pooled = 0.5 * (sd_f * sd_f + sd_b * sd_b);
    if pooled == 0.0 {
        return Err(OctError::DegenerateContrast);
    }
    Ok((mu_f - mu_b).abs() / pooled.sqrt())
}

/// Peak signal-to-noise ratio in dB; the peak is the maximum pixel of the
/// first (noisy) image.
pub fn psnr(noisy: &Image, denoised: &Image) -> Result<f64> {
    noisy.same_size(denoised)?;
    let n = (noisy.width() * noisy.height()) as f64;
    let mse: f64 = noisy
        .pixels()
        .iter()
        .zip(denoised.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Err(OctError::InfinitePsnr);
    }
    Ok(20.0 * (noisy.max() / mse.sqrt()).log10())
}

/// Mean and standard deviation of per-column absolute surface error, in
/// micrometers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurfaceError {
    pub mean_um: f64,
    pub sd_um: f64,
    /// Columns where both traces were defined.
    pub columns: usize,
}

pub fn surface_error(
    auto: &SurfaceTrace,
    manual: &SurfaceTrace,
    res: &Resolution,
) -> Result<SurfaceError> {
    let errs: Vec<f64> = auto
        .rows
        .iter()
        .zip(&manual.rows)
        .filter_map(|(a, m)| match (a, m) {
            (Some(a), Some(m)) => Some(to_um((*a as f64 - *m as f64).abs(), res)),
            _ => None,
        })
        .collect();
    if errs.is_empty() {
        return Err(OctError::NoOverlap);
    }
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let sd = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n).sqrt();
    Ok(SurfaceError {
        mean_um: mean,
        sd_um: sd,
        columns: errs.len(),
    })
}

/// Sub-retinal layers measured between surface pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Nfl,
    IplGcl,
    Inl,
    Onl,
    IsOs,
    Rpe,
    NflIpl,
    Inner,
    Outer,
}

impl Layer {
    pub const ALL: [Layer; 9] = [
        Layer::Nfl,
        Layer::IplGcl,
        Layer::Inl,
        Layer::Onl,
        Layer::IsOs,
        Layer::Rpe,
        Layer::NflIpl,
        Layer::Inner,
        Layer::Outer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Nfl => "NFL",
            Layer::IplGcl => "IPL/GCL",
            Layer::Inl => "INL",
            Layer::Onl => "ONL",
            Layer::IsOs => "IS/OS",
            Layer::Rpe => "RPE",
            Layer::NflIpl => "NFL+IPL",
            Layer::Inner => "Inner",
            Layer::Outer => "Outer",
        }
    }

    /// Bounding surfaces (upper, lower).
    pub fn bounds(self) -> (SurfaceLabel, SurfaceLabel) {
        match self {
            Layer::Nfl => (SurfaceLabel::S1, SurfaceLabel::S2),
            Layer::IplGcl => (SurfaceLabel::S2, SurfaceLabel::S3),
            Layer::Inl => (SurfaceLabel::S3, SurfaceLabel::S4),
            Layer::Onl => (SurfaceLabel::S4, SurfaceLabel::S5),
            Layer::IsOs => (SurfaceLabel::S5, SurfaceLabel::S6),
            Layer::Rpe => (SurfaceLabel::S6, SurfaceLabel::S7),
            Layer::NflIpl => (SurfaceLabel::S1, SurfaceLabel::S3),
            Layer::Inner => (SurfaceLabel::S1, SurfaceLabel::S5),
            Layer::Outer => (SurfaceLabel::S5, SurfaceLabel::S7),
        }
    }

    pub fn parse(s: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.name() == s)
    }
}

/// Per-column thickness of one layer in micrometers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThicknessProfile {
    pub label: String,
    /// One entry per column; `None` where either bounding surface is
    /// undefined.
    pub per_column_um: Vec<Option<f64>>,
    pub mean_um: f64,
    pub sd_um: f64,
    /// Columns where the lower surface sat above the upper one (clamped to 0).
    pub negatives_clamped: usize,
}

/// Per-column `(rowB - rowA) * axial pitch`; negatives clamp to zero and are
/// counted.
pub fn thickness(
    surf_a: &SurfaceTrace,
    surf_b: &SurfaceTrace,
    res: &Resolution,
) -> Result<ThicknessProfile> {
    let width = surf_a.width().min(surf_b.width());
    let mut per_column = vec![None; surf_a.width().max(surf_b.width())];
    let mut negatives = 0usize;
    let mut defined = Vec::new();
    for c in 0..width {
        if let (Some(a), Some(b)) = (surf_a.rows[c], surf_b.rows[c]) {
            let mut px = b as f64 - a as f64;
            if px < 0.0 {
                px = 0.0;
                negatives += 1;
            }
            let um = to_um(px, res);
            per_column[c] = Some(um);
            defined.push(um);
        }
    }
    if defined.is_empty() {
        return Err(OctError::NoOverlap);
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let sd = (defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let label = Layer::ALL
        .into_iter()
        .find(|l| l.bounds() == (surf_a.label, surf_b.label))
        .map(|l| l.name().to_string())
        .unwrap_or_else(|| format!("{}-{}", surf_a.label.name(), surf_b.label.name()));
    Ok(ThicknessProfile {
        label,
        per_column_um: per_column,
        mean_um: mean,
        sd_um: sd,
        negatives_clamped: negatives,
    })
}

/// Pearson r and coefficient of determination of `auto` against `reference`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Agreement {
    pub r: f64,
    pub r2: f64,
}

pub fn agreement(auto: &ThicknessProfile, reference: &ThicknessProfile) -> Result<Agreement> {
    let pairs: Vec<(f64, f64)> = auto
        .per_column_um
        .iter()
        .zip(&reference.per_column_um)
        .filter_map(|(a, r)| match (a, r) {
            (Some(a), Some(r)) => Some((*a, *r)),
            _ => None,
        })
        .collect();
    if pairs.len() < 3 {
        return Err(OctError::NoOverlap);
    }
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_r = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_r = 0.0;
    let mut ss_res = 0.0;
    for &(a, r) in &pairs {
        cov += (a - mean_a) * (r - mean_r);
        var_a += (a - mean_a) * (a - mean_a);
        var_r += (r - mean_r) * (r - mean_r);
        ss_res += (r - a) * (r - a);
    }
    if var_r == 0.0 {
        return Err(OctError::UndefinedCorrelation);
    }
    let r = if var_a == 0.0 {
        return Err(OctError::UndefinedCorrelation);
    } else {
        cov / (var_a.sqrt() * var_r.sqrt())
    };
    Ok(Agreement {
        r,
        r2: 1.0 - ss_res / var_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityRange;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_region_image(mu_f: f64, mu_b: f64) -> (Image, Mask) {
        // top half foreground, bottom half background
        let (w, h) = (16, 16);
        let mut img = Image::zeros(w, h, IntensityRange::Byte).unwrap();
        let mut fg = Mask::filled(w, h, false);
        for r in 0..h {
            for c in 0..w {
                if r < h / 2 {
                    img.set(r, c, mu_f + if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
                    fg.set(r, c, true);
                } else {
                    img.set(r, c, mu_b + if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
                }
            }
        }
        (img, fg)
    }

    #[test]
    fn snr_log_identities() {
        // sigma_b = 1 exactly (alternating +-1), mu_f = 100
        let (img, fg) = two_region_image(100.0, 0.0);
        assert!((snr(&img, &fg).unwrap() - 40.0).abs() < 1e-9);
        // mu_f = 100, sigma_b scaled to 10
        let img10 = img.map(IntensityRange::Byte, |v| {
            if v >= 99.0 {
                100.0 + (v - 100.0)
            } else {
                v * 10.0
            }
        });
        assert!((snr(&img10, &fg).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn snr_rejects_noise_free_background() {
        let (w, h) = (8, 8);
        let img = Image::filled(w, h, IntensityRange::Byte, 5.0).unwrap();
        let mut fg = Mask::filled(w, h, false);
        for c in 0..w {
            fg.set(0, c, true);
        }
        assert!(matches!(snr(&img, &fg), Err(OctError::NoiseFreeBackground)));
    }

    #[test]
    fn cnr_unit_pooled_sd() {
        let (img, fg) = two_region_image(10.0, 0.0);
        // sd_f = sd_b = 1, pooled = 1
        assert!((cnr(&img, &fg).unwrap() - 10.0).abs() < 1e-9);
        let (img_eq, fg_eq) = two_region_image(7.0, 7.0);
        assert!(cnr(&img_eq, &fg_eq).unwrap().abs() < 1e-9);
    }

    #[test]
    fn cnr_degenerate_when_both_constant() {
        let (w, h) = (8, 8);
        let img = Image::filled(w, h, IntensityRange::Byte, 3.0).unwrap();
        let mut fg = Mask::filled(w, h, false);
        fg.set(0, 0, true);
        assert!(matches!(cnr(&img, &fg), Err(OctError::DegenerateContrast)));
    }

    #[test]
    fn psnr_uniform_unit_error() {
        let noisy = Image::filled(8, 8, IntensityRange::Byte, 255.0).unwrap();
        let denoised = Image::filled(8, 8, IntensityRange::Byte, 254.0).unwrap();
        let expect = 20.0 * 255.0f64.log10();
        assert!((psnr(&noisy, &denoised).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn psnr_identical_errors() {
        let img = Image::filled(8, 8, IntensityRange::Byte, 9.0).unwrap();
        assert!(matches!(psnr(&img, &img), Err(OctError::InfinitePsnr)));
    }

    #[test]
    fn psnr_scale_aware() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.01 * rng.gen::<f64>()).collect();
        let unit_a = Image::new(8, 8, IntensityRange::Unit, a.clone()).unwrap();
        let unit_b = Image::new(8, 8, IntensityRange::Unit, b.clone()).unwrap();
        let byte_a = unit_a.map(IntensityRange::Byte, |v| v * 255.0);
        let byte_b = unit_b.map(IntensityRange::Byte, |v| v * 255.0);
        let du = psnr(&unit_a, &unit_b).unwrap();
        let db = psnr(&byte_a, &byte_b).unwrap();
        assert!((du - db).abs() < 1e-9);
    }

    #[test]
    fn foreground_band_respects_margins() {
        let s1 = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(30); 12]);
        let s7 = SurfaceTrace::new(SurfaceLabel::S7, vec![Some(60); 12]);
        let spec = ForegroundSpec::default();
        let mask = foreground_mask(&spec, &s1, &s7, 12, 200).unwrap();
        assert!(mask.get(20, 0) && !mask.get(19, 0));
        assert!(mask.get(110, 0) && !mask.get(111, 0));
    }

    #[test]
    fn surface_error_offset_and_symmetry() {
        let a = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(10); 20]);
        let b = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(12); 20]);
        let res = Resolution::default();
        let e = surface_error(&a, &b, &res).unwrap();
        assert!((e.mean_um - 7.74).abs() < 1e-9);
        assert!(e.sd_um.abs() < 1e-9);
        let rev = surface_error(&b, &a, &res).unwrap();
        assert!((e.mean_um - rev.mean_um).abs() < 1e-12);
        let zero = surface_error(&a, &a, &res).unwrap();
        assert_eq!(zero.mean_um, 0.0);
    }

    #[test]
    fn surface_error_disjoint_coverage_errors() {
        let mut ra = vec![None; 10];
        let mut rb = vec![None; 10];
        ra[0] = Some(5);
        rb[9] = Some(5);
        let a = SurfaceTrace::new(SurfaceLabel::S1, ra);
        let b = SurfaceTrace::new(SurfaceLabel::S1, rb);
        assert!(matches!(
            surface_error(&a, &b, &Resolution::default()),
            Err(OctError::NoOverlap)
        ));
    }

    #[test]
    fn thickness_uniform_band() {
        let a = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(10); 8]);
        let b = SurfaceTrace::new(SurfaceLabel::S2, vec![Some(20); 8]);
        let t = thickness(&a, &b, &Resolution::default()).unwrap();
        assert_eq!(t.label, "NFL");
        assert!((t.mean_um - 38.7).abs() < 1e-9);
        assert_eq!(t.negatives_clamped, 0);
    }

    #[test]
    fn thickness_clamps_negatives() {
        let a = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(20); 8]);
        let b = SurfaceTrace::new(SurfaceLabel::S2, vec![Some(10); 8]);
        let t = thickness(&a, &b, &Resolution::default()).unwrap();
        assert_eq!(t.mean_um, 0.0);
        assert_eq!(t.negatives_clamped, 8);
    }

    #[test]
    fn thickness_additivity() {
        let res = Resolution::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = 32;
        let mut rows: Vec<Vec<Option<usize>>> = Vec::new();
        let mut prev: Vec<usize> = (0..w).map(|_| rng.gen_range(5..15)).collect();
        rows.push(prev.iter().map(|&r| Some(r)).collect());
        for _ in 0..4 {
            prev = prev
                .iter()
                .map(|&r| r + rng.gen_range(0..10usize))
                .collect();
            rows.push(prev.iter().map(|&r| Some(r)).collect());
        }
        let labels = [
            SurfaceLabel::S1,
            SurfaceLabel::S2,
            SurfaceLabel::S3,
            SurfaceLabel::S4,
            SurfaceLabel::S5,
        ];
        let traces: Vec<SurfaceTrace> = labels
            .iter()
            .zip(&rows)
            .map(|(&l, r)| SurfaceTrace::new(l, r.clone()))
            .collect();
        let inner = thickness(&traces[0], &traces[4], &res).unwrap();
        for c in 0..w {
            let sum: f64 = (0..4)
                .map(|i| {
                    thickness(&traces[i], &traces[i + 1], &res).unwrap().per_column_um[c].unwrap()
                })
                .sum();
            assert!((inner.per_column_um[c].unwrap() - sum).abs() < 1e-9);
        }
    }

    fn profile_from(vals: &[f64]) -> ThicknessProfile {
        ThicknessProfile {
            label: "test".into(),
            per_column_um: vals.iter().map(|&v| Some(v)).collect(),
            mean_um: vals.iter().sum::<f64>() / vals.len() as f64,
            sd_um: 0.0,
            negatives_clamped: 0,
        }
    }

    #[test]
    fn agreement_identity_and_shift() {
        let a = profile_from(&[1.0, 2.0, 3.0, 4.0, 8.0]);
        let same = agreement(&a, &a).unwrap();
        assert!((same.r - 1.0).abs() < 1e-12);
        assert!((same.r2 - 1.0).abs() < 1e-12);
        let shifted = profile_from(&[6.0, 7.0, 8.0, 9.0, 13.0]);
        let shift = agreement(&shifted, &a).unwrap();
        assert!((shift.r - 1.0).abs() < 1e-12);
        assert!(shift.r2 < 1.0);
    }

    #[test]
    fn agreement_matches_textbook_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() * 50.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.8 + rng.gen::<f64>() * 5.0).collect();
        let got = agreement(&profile_from(&y), &profile_from(&x)).unwrap();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        let r_oracle = cov / (vx.sqrt() * vy.sqrt());
        let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let r2_oracle = 1.0 - ss_res / vx;
        assert!((got.r - r_oracle).abs() < 1e-9);
        assert!((got.r2 - r2_oracle).abs() < 1e-9);
    }

    #[test]
    fn agreement_r_affine_invariant() {
        let a = profile_from(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0]);
        let b = profile_from(&[2.0, 7.0, 1.0, 8.0, 2.0, 8.0]);
        let base = agreement(&a, &b).unwrap();
        let scaled = profile_from(
            &a.per_column_um
                .iter()
                .map(|v| v.unwrap() * 3.0 + 2.0)
                .collect::<Vec<_>>(),
        );
        let after = agreement(&scaled, &b).unwrap();
        assert!((base.r - after.r).abs() < 1e-12);
        assert!((base.r2 - after.r2).abs() > 1e-6);
    }

    #[test]
    fn agreement_zero_variance_reference_errors() {
        let a = profile_from(&[1.0, 2.0, 3.0]);
        let flat = profile_from(&[5.0, 5.0, 5.0]);
        assert!(matches!(
            agreement(&a, &flat),
            Err(OctError::UndefinedCorrelation)
        ));
    }
}
