//! Iterative multi-resolution extraction of the 7 sub-retinal surfaces.
//!
//! Six iterations run in decreasing order of surface detectability. Each
//! iteration masks a source image (the denoised B-scan or its negative) to a
//! region bounded by previously found surfaces, high-pass filters it,
//! thresholds the response and selects connected regions by a per-iteration
//! criterion; the top/bottom boundary of the selected regions yields the
//! surfaces. A discontinuity exception merges additional regions whenever
//! the selected surface spans less than 75% of Surface 1.

pub mod regions;

pub use regions::{
    connected_components, otsu_threshold, region_grow, region_grow_from, select_regions, select_regions_with_merge,
    trace_surface, Criterion, Region, Selection, TraceSide,
};

use serde::{Deserialize, Serialize};

use crate::error::{OctError, Result};
use crate::filter::{box_filter, convolve_separable, gauss_filter, gaussian_taps};
use crate::image::{Image, IntensityRange, Mask};
use crate::trace::{SurfaceLabel, SurfaceTrace};

/// Source image of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSelector {
    /// The denoised image `I_d`.
    Denoised,
    /// Its negative `1 - I_d`.
    Negative,
}

/// Search-region rule of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRule {
    WholeImage,
    /// Rows between two previously found surfaces (interpolated full-width).
    Between(SurfaceLabel, SurfaceLabel),
}

/// High-pass construction of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterRule {
    /// Difference of separable Gaussians (horizontal then vertical taps).
    DifferenceOfGaussians,
    /// Source minus a square mean filter.
    BoxHighpass(usize),
    /// Source minus a 2-D Gaussian smoother.
    GaussHighpass,
    /// Percentile contrast stretch of the masked source (no subtraction).
    ContrastStretch,
}

/// Thresholding rule of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Byte-rescale then seeded region growing.
    RegionGrow,
    /// Keep strictly negative response pixels.
    NegativePixels,
    /// Keep laterally smoothed response pixels above a small positive
    /// floor (locally dark bands of the complement source).
    PositivePixels,
    /// Keep pixels above Otsu's threshold of the masked response.
    OtsuAbove,
}

/// One row of the iteration table.
#[derive(Debug, Clone)]
pub struct IterationSpec {
    pub index: usize,
    pub source: SourceSelector,
    pub mask_rule: MaskRule,
    pub filter_rule: FilterRule,
    pub threshold_rule: ThresholdRule,
    pub criterion: Criterion,
    /// Extra rows appended below the mask's lower bounding trace; part of
    /// the search band (candidate regions may live there).
    pub pad_bottom: usize,
    /// Extra rows prepended above the mask's upper bounding trace, so filter
    /// windows at the band top see real context instead of the cut; never
    /// part of the search band.
    pub pad_top: usize,
    /// Like `pad_top` but below the band: filter context only.
    pub pad_bottom_context: usize,
    /// Rows excluded from the search band just above its lower bounding
    /// surface: the cut's own edge response lives there.
    pub guard_bottom: usize,
    /// Rows excluded from the search band just below its upper bounding
    /// surface (iteration 2): the inner retina reads as a locally bright
    /// band next to the dark vitreous, but the target complex sits deep
    /// in the band.
    pub guard_top: usize,
    /// Which side of the selected regions becomes which surface.
    pub outputs: &'static [(TraceSide, SurfaceLabel)],
}

/// The six iterations. Surfaces come out in decreasing detectability:
/// S1/choroid, then S5/S7, S6, S4, S3 and finally S2.
pub fn iteration_table(cfg: &SegmentConfig) -> [IterationSpec; 6] {
    [
        IterationSpec {
            index: 1,
            source: SourceSelector::Denoised,
            mask_rule: MaskRule::WholeImage,
            filter_rule: FilterRule::DifferenceOfGaussians,
            threshold_rule: ThresholdRule::RegionGrow,
            criterion: Criterion::AllRegions,
            pad_bottom: 0,
            pad_top: 0,
            pad_bottom_context: 0,
            guard_bottom: 0,
            guard_top: 0,
            outputs: &[
                (TraceSide::Top, SurfaceLabel::S1),
                (TraceSide::Bottom, SurfaceLabel::Choroid),
            ],
        },
        IterationSpec {
            index: 2,
            source: SourceSelector::Negative,
            mask_rule: MaskRule::Between(SurfaceLabel::S1, SurfaceLabel::Choroid),
            filter_rule: FilterRule::BoxHighpass(cfg.box_filter_size),
            threshold_rule: ThresholdRule::NegativePixels,
            criterion: Criterion::MaxMajorAxisLength,
            pad_bottom: cfg.choroid_pad_px,
            pad_top: 0,
            pad_bottom_context: 0,
            guard_bottom: 0,
            guard_top: cfg.inner_guard_px,
            outputs: &[
                (TraceSide::Top, SurfaceLabel::S5),
                (TraceSide::Bottom, SurfaceLabel::S7),
            ],
        },
        IterationSpec {
            index: 3,
            source: SourceSelector::Negative,
            mask_rule: MaskRule::Between(SurfaceLabel::S5, SurfaceLabel::S7),
            filter_rule: FilterRule::ContrastStretch,
            threshold_rule: ThresholdRule::OtsuAbove,
            criterion: Criterion::AllRegions,
            pad_bottom: 0,
            pad_top: 0,
            pad_bottom_context: 0,
            guard_bottom: cfg.s6_guard_px,
            guard_top: 0,
            outputs: &[(TraceSide::Bottom, SurfaceLabel::S6)],
        },
        IterationSpec {
            index: 4,
            source: SourceSelector::Negative,
            mask_rule: MaskRule::Between(SurfaceLabel::S1, SurfaceLabel::S5),
            filter_rule: FilterRule::BoxHighpass(cfg.inner_box_px),
            threshold_rule: ThresholdRule::PositivePixels,
            criterion: Criterion::MaxMajorAxisLength,
            pad_bottom: 0,
            pad_top: cfg.context_pad_px,
            pad_bottom_context: cfg.context_pad_px,
            guard_bottom: cfg.onl_guard_px,
            guard_top: cfg.nfl_guard_px,
            outputs: &[(TraceSide::Bottom, SurfaceLabel::S4)],
        },
        IterationSpec {
            index: 5,
            source: SourceSelector::Negative,
            mask_rule: MaskRule::Between(SurfaceLabel::S1, SurfaceLabel::S4),
            filter_rule: FilterRule::GaussHighpass,
            threshold_rule: ThresholdRule::PositivePixels,
            criterion: Criterion::MaxArea,
            pad_bottom: 0,
            pad_top: cfg.context_pad_px,
            pad_bottom_context: cfg.context_pad_px,
            guard_bottom: cfg.select_guard_px,
            guard_top: cfg.nfl_guard_px,
            outputs: &[(TraceSide::Bottom, SurfaceLabel::S3)],
        },
        IterationSpec {
            index: 6,
            source: SourceSelector::Denoised,
            mask_rule: MaskRule::Between(SurfaceLabel::S1, SurfaceLabel::S3),
            filter_rule: FilterRule::BoxHighpass(cfg.box_filter_size),
            threshold_rule: ThresholdRule::OtsuAbove,
            criterion: Criterion::MaxArea,
            pad_bottom: 0,
            pad_top: cfg.context_pad_px,
            pad_bottom_context: cfg.context_pad_px,
            guard_bottom: cfg.select_guard_px,
            guard_top: 0,
            outputs: &[(TraceSide::Bottom, SurfaceLabel::S2)],
        },
    ]
}

/// Tunables for segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Taps and sigma of the iteration-1 difference-of-Gaussians kernels.
    pub dog_kernel_len: usize,
    pub dog_sigma: f64,
    /// Horizontal smoothing of the iteration-1 response before growing;
    /// surfaces are laterally continuous, speckle residue is not.
    pub ridge_smooth_len: usize,
    pub ridge_smooth_sigma: f64,
    /// Percentile mapped to 255 when the iteration-1 response is rescaled;
    /// clipping lets the ridge saturate instead of a lone outlier.
    pub ridge_clip_pct: f64,
    /// Region-growing absorption threshold (byte), retried downward to the
    /// minimum while Surface 1 coverage stays short.
    pub regiongrow_threshold: f64,
    pub regiongrow_threshold_min: f64,
    /// Seed level (byte) for region growing; every pixel at or above it
    /// seeds the flood.
    pub seed_level: f64,
    /// Square mean-filter side for the box high-pass iterations.
    pub box_filter_size: usize,
    /// Smaller box for the iteration-4 high-pass: its window must resolve
    /// the INL/ONL step without reaching the darker IPL above.
    pub inner_box_px: usize,
    /// Iteration-5 Gaussian smoother (horizontally biased).
    pub gauss_size: usize,
    pub gauss_sigma_x: f64,
    pub gauss_sigma_y: f64,
    /// Contrast-stretch percentiles for iteration 3.
    pub stretch_lo_pct: f64,
    pub stretch_hi_pct: f64,
    /// Components below this pixel count are discarded before ranking.
    pub min_region_px: usize,
    /// Rows appended below the iteration-1 bottom trace when bounding the
    /// iteration-2 search region; the hyper-reflective complex must keep
    /// darker material beneath it inside the mask.
    pub choroid_pad_px: usize,
    /// Rows prepended above the inner-band masks (iterations 4-6); real
    /// vitreous context keeps the NFL from reading as a high-pass extremum
    /// at the cut.
    pub context_pad_px: usize,
    /// Maximum row gap bridged when the iteration-2 complex splits into
    /// stacked fragments.
    pub complex_merge_gap_px: usize,
    /// Iteration-2 candidates whose mean response magnitude falls below
    /// this fraction of the strongest candidate's are discarded.
    pub merge_strength_frac: f64,
    /// Downward merge gaps for the iteration-4/5 band interiors, where the
    /// high-pass response of a thick uniform band decays to zero between
    /// its edge strips. Each gap must chain that iteration's own strips
    /// without reaching the first strip below its target surface.
    pub s4_merge_gap_px: usize,
    pub s3_merge_gap_px: usize,
    /// The iteration-4/5 positive thresholds floor at these fractions of
    /// the in-band 95th-percentile response; iteration 5's response spans
    /// a far narrower range, so its tilt residue sits relatively higher.
    pub s4_floor_frac: f64,
    pub s3_floor_frac: f64,
    /// Rows excluded from selection just above a band's lower bounding
    /// surface (iterations 4-6); the cut's own edge response lives there.
    pub select_guard_px: usize,
    /// Rows excluded from selection above Surface 7 in iteration 3; the
    /// choroid transition reads as dark as the target gap, one RPE
    /// thickness higher.
    pub s6_guard_px: usize,
    /// Rows excluded from selection at the top of the iteration-4/5 bands;
    /// the NFL top edge responds as strongly as the target dark bands.
    pub nfl_guard_px: usize,
    /// Iteration-4 bottom guard: the ONL reads locally dark where its
    /// window reaches the bright IS/OS, one half-window above Surface 5.
    pub onl_guard_px: usize,
    /// Rows excluded from selection just below Surface 1 in iteration 2;
    /// the inner retina is bright against the vitreous and would otherwise
    /// compete with the hyper-reflective complex.
    pub inner_guard_px: usize,
    /// Half-window of the final trace refinement: each traced row moves to
    /// the strongest vertical gradient of the expected polarity nearby.
    pub refine_radius_px: usize,
    /// Minimum gradient magnitude accepted by refinement; weaker evidence
    /// leaves the traced row unchanged.
    pub refine_min_grad: f64,
    /// Width of the lateral median filter applied to each raw trace before
    /// refinement; isolated tracing dropouts would otherwise start the
    /// gradient search outside its window.
    pub trace_median_px: usize,
    /// Retain per-iteration images in the result.
    pub keep_diagnostics: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            dog_kernel_len: 15,
            dog_sigma: 4.0,
            ridge_smooth_len: 31,
            ridge_smooth_sigma: 10.0,
            ridge_clip_pct: 98.0,
            regiongrow_threshold: 200.0,
            regiongrow_threshold_min: 180.0,
            seed_level: 245.0,
            box_filter_size: 25,
            inner_box_px: 15,
            gauss_size: 10,
            gauss_sigma_x: 4.0,
            gauss_sigma_y: 2.0,
            stretch_lo_pct: 1.0,
            stretch_hi_pct: 99.0,
            min_region_px: 20,
            choroid_pad_px: 35,
            context_pad_px: 15,
            complex_merge_gap_px: 12,
            merge_strength_frac: 0.4,
            s4_merge_gap_px: 10,
            s3_merge_gap_px: 6,
            s4_floor_frac: 0.08,
            s3_floor_frac: 0.22,
            select_guard_px: 9,
            inner_guard_px: 30,
            s6_guard_px: 10,
            nfl_guard_px: 10,
            onl_guard_px: 14,
            refine_radius_px: 9,
            refine_min_grad: 0.004,
            trace_median_px: 41,
            keep_diagnostics: false,
        }
    }
}

/// Per-iteration record kept for audits.
#[derive(Debug, Clone)]
pub struct IterationDiagnostics {
    pub index: usize,
    pub regions_used: usize,
    pub exception_fired: bool,
    pub filtered: Option<Image>,
    pub binary: Option<Mask>,
}

/// Ordered surface set plus iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SegmentationResult {
    surfaces: Vec<SurfaceTrace>,
    pub per_iteration: Vec<IterationDiagnostics>,
}

impl SegmentationResult {
    pub fn new(surfaces: Vec<SurfaceTrace>) -> Self {
        SegmentationResult {
            surfaces,
            per_iteration: Vec::new(),
        }
    }

    pub fn surface(&self, label: SurfaceLabel) -> Option<&SurfaceTrace> {
        self.surfaces.iter().find(|t| t.label == label)
    }

    pub fn surfaces(&self) -> &[SurfaceTrace] {
        &self.surfaces
    }

    /// True when S1 <= S2 <= ... <= S7 at every column where all are defined.
    pub fn ordering_holds(&self) -> bool {
        let traces: Vec<&SurfaceTrace> = SurfaceLabel::SURFACES
            .iter()
            .filter_map(|&l| self.surface(l))
            .collect();
        if traces.len() < 2 {
            return true;
        }
        let width = traces[0].width();
        for col in 0..width {
            let rows: Vec<Option<usize>> = traces.iter().map(|t| t.rows[col]).collect();
            if rows.iter().any(|r| r.is_none()) {
                continue;
            }
            for pair in rows.windows(2) {
                if pair[0].unwrap() > pair[1].unwrap() {
                    return false;
                }
            }
        }
        true
    }
}

/// Full-width mask between two surfaces (rows inclusive), surfaces linearly
/// interpolated where undefined.
pub fn mask_between(
    upper: &SurfaceTrace,
    lower: &SurfaceTrace,
    width: usize,
    height: usize,
    pad_bottom: usize,
    pad_top: usize,
    shrink_bottom: usize,
    shrink_top: usize,
) -> Result<Mask> {
    let up = upper
        .interpolate_full()
        .ok_or(OctError::NoCandidateRegion(0))?;
    let lo = lower
        .interpolate_full()
        .ok_or(OctError::NoCandidateRegion(0))?;
    let mut mask = Mask::filled(width, height, false);
    for c in 0..width {
        let r0 = (up[c].round().max(0.0) as usize + shrink_top).saturating_sub(pad_top);
        let r1 = ((lo[c].round() as usize + pad_bottom).saturating_sub(shrink_bottom))
            .min(height.saturating_sub(1));
        for r in r0..=r1.max(r0) {
            if r < height {
                mask.set(r, c, true);
            }
        }
    }
    Ok(mask)
}

fn masked_product(src: &Image, mask: &Mask) -> Image {
    let mut out = src.clone();
    for r in 0..src.height() {
        for c in 0..src.width() {
            if !mask.get(r, c) {
                out.set(r, c, 0.0);
            }
        }
    }
    out
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = (pct / 100.0 * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Masked high-pass step `I_l = (I_s . G_l) - LPF_l(I_s . G_l)`, with the
/// iteration-1 difference-of-Gaussians and iteration-3 contrast-stretch
/// special cases.
pub fn highpass_step(
    src: &Image,
    mask: &Mask,
    rule: FilterRule,
    cfg: &SegmentConfig,
) -> Result<Image> {
    mask.matches(src)?;
    if mask.is_empty() {
        return Err(OctError::EmptyRegionOfInterest(0));
    }
    let masked = masked_product(src, mask);
    let out = match rule {
        FilterRule::DifferenceOfGaussians => {
            let taps = gaussian_taps(cfg.dog_kernel_len, cfg.dog_sigma);
            let blurred = convolve_separable(&masked, &taps, &taps);
            subtract(&masked, &blurred)
        }
        FilterRule::BoxHighpass(size) => {
            let blurred = box_filter(&masked, size);
            subtract(&masked, &blurred)
        }
        FilterRule::GaussHighpass => {
            let blurred = gauss_filter(&masked, cfg.gauss_size, cfg.gauss_sigma_x, cfg.gauss_sigma_y);
            subtract(&masked, &blurred)
        }
        FilterRule::ContrastStretch => {
            let mut vals: Vec<f64> = (0..src.height())
                .flat_map(|r| (0..src.width()).map(move |c| (r, c)))
                .filter(|&(r, c)| mask.get(r, c))
                .map(|(r, c)| masked.get(r, c))
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = percentile(&vals, cfg.stretch_lo_pct);
            let hi = percentile(&vals, cfg.stretch_hi_pct);
            let span = (hi - lo).max(f64::EPSILON);
            let mut out = Image::assemble(
                src.width(),
                src.height(),
                IntensityRange::Unit,
                vec![0.0; src.width() * src.height()],
            );
            for r in 0..src.height() {
                for c in 0..src.width() {
                    if mask.get(r, c) {
                        out.set(r, c, ((masked.get(r, c) - lo) / span).clamp(0.0, 1.0));
                    }
                }
            }
            out
        }
    };
    Ok(out)
}

fn subtract(a: &Image, b: &Image) -> Image {
    let data = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| x - y)
        .collect();
    Image::assemble(a.width(), a.height(), IntensityRange::Unit, data)
}

/// Byte-rescale a response using min/max over mask pixels only; pixels
/// outside the mask map to 0.
fn rescale_in_mask(img: &Image, mask: &Mask) -> Image {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..img.height() {
        for c in 0..img.width() {
            if mask.get(r, c) {
                lo = lo.min(img.get(r, c));
                hi = hi.max(img.get(r, c));
            }
        }
    }
    let span = hi - lo;
    let mut out = Image::assemble(
        img.width(),
        img.height(),
        IntensityRange::Byte,
        vec![0.0; img.width() * img.height()],
    );
    if span <= 0.0 {
        return out;
    }
    for r in 0..img.height() {
        for c in 0..img.width() {
            if mask.get(r, c) {
                out.set(r, c, (img.get(r, c) - lo) / span * 255.0);
            }
        }
    }
    out
}

pub fn threshold_step(
    filtered: &Image,
    mask: &Mask,
    rule: ThresholdRule,
    cfg: &SegmentConfig,
    iteration: usize,
) -> Result<Mask> {
    match rule {
        ThresholdRule::RegionGrow => {
            let row_taps = gaussian_taps(cfg.ridge_smooth_len, cfg.ridge_smooth_sigma);
            let smooth = convolve_separable(filtered, &row_taps, &[1.0]);
            let mut vals: Vec<f64> = smooth.pixels().to_vec();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = vals[0];
            let hi = percentile(&vals, cfg.ridge_clip_pct).max(lo + f64::EPSILON);
            let byte = smooth.map(IntensityRange::Byte, |v| {
                255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            });
            let min_extent = (0.75 * byte.width() as f64) as usize;
            let mut t = cfg.regiongrow_threshold;
            loop {
                let grown = region_grow_from(&byte, cfg.seed_level, t)?;
                let extent = trace_surface(&grown, TraceSide::Top, SurfaceLabel::S1).x_extent();
                if extent >= min_extent || t <= cfg.regiongrow_threshold_min {
                    return Ok(grown);
                }
                t -= 1.0;
            }
        }
        ThresholdRule::NegativePixels => {
            // lateral smoothing: layer bands are horizontally coherent,
            // speckle blobs in the choroid are not
            let row_taps = gaussian_taps(cfg.ridge_smooth_len, cfg.ridge_smooth_sigma);
            let smooth = convolve_separable(filtered, &row_taps, &[1.0]);
            let mut out = Mask::filled(filtered.width(), filtered.height(), false);
            for r in 0..filtered.height() {
                for c in 0..filtered.width() {
                    if mask.get(r, c) && smooth.get(r, c) < 0.0 {
                        out.set(r, c, true);
                    }
                }
            }
            Ok(out)
        }
        ThresholdRule::PositivePixels => {
            // lateral smoothing closes noise dropouts in band-edge strips;
            // the floor (a fraction of the strong-response level) rejects
            // the faint systematic residue band tilt leaves inside uniform
            // bands, which a bare zero threshold would keep
            let row_taps = gaussian_taps(cfg.ridge_smooth_len, cfg.ridge_smooth_sigma);
            let smooth = convolve_separable(filtered, &row_taps, &[1.0]);
            let mut vals: Vec<f64> = (0..smooth.height())
                .flat_map(|r| (0..smooth.width()).map(move |c| (r, c)))
                .filter(|&(r, c)| mask.get(r, c))
                .map(|(r, c)| smooth.get(r, c))
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let frac = if iteration == 5 {
                cfg.s3_floor_frac
            } else {
                cfg.s4_floor_frac
            };
            let floor = (frac * percentile(&vals, 95.0)).max(0.0);
            let mut out = Mask::filled(smooth.width(), smooth.height(), false);
            for r in 0..smooth.height() {
                for c in 0..smooth.width() {
                    if mask.get(r, c) && smooth.get(r, c) > floor {
                        out.set(r, c, true);
                    }
                }
            }
            Ok(out)
        }
        ThresholdRule::OtsuAbove => {
            let byte = rescale_in_mask(filtered, mask);
            let t = otsu_threshold(&byte, mask)
                .map_err(|_| OctError::NoCandidateRegion(iteration))?;
            let mut out = Mask::filled(filtered.width(), filtered.height(), false);
            for r in 0..filtered.height() {
                for c in 0..filtered.width() {
                    if mask.get(r, c) && byte.get(r, c) > t {
                        out.set(r, c, true);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Fill gaps in a trace by rounded linear interpolation; used only for
/// Surface 1, which is continuous by definition.
fn fill_trace(trace: &SurfaceTrace) -> SurfaceTrace {
    match trace.interpolate_full() {
        Some(full) => SurfaceTrace::new(
            trace.label,
            full.into_iter().map(|v| Some(v.round() as usize)).collect(),
        ),
        None => trace.clone(),
    }
}

/// Clip later-extracted surfaces so the vertical ordering S1..S7 holds; the
/// earlier (more reliable) surface wins at offending columns.
fn repair_ordering(surfaces: &mut [SurfaceTrace]) {
    // anatomical index per label
    let order = |l: SurfaceLabel| -> usize {
        match l {
            SurfaceLabel::S1 => 0,
            SurfaceLabel::S2 => 1,
            SurfaceLabel::S3 => 2,
            SurfaceLabel::S4 => 3,
            SurfaceLabel::S5 => 4,
            SurfaceLabel::S6 => 5,
            SurfaceLabel::S7 => 6,
            SurfaceLabel::Choroid => 7,
        }
    };
    // reliability order; the iteration-1 choroid trace only bounds the
    // iteration-2 search band, so it yields to every retinal surface here
    let extraction = [
        SurfaceLabel::S1,
        SurfaceLabel::S5,
        SurfaceLabel::S7,
        SurfaceLabel::S6,
        SurfaceLabel::S4,
        SurfaceLabel::S3,
        SurfaceLabel::S2,
        SurfaceLabel::Choroid,
    ];
    let width = surfaces.first().map(|t| t.width()).unwrap_or(0);
    let mut fixed: Vec<(usize, Vec<Option<usize>>)> = Vec::new();
    for label in extraction {
        let Some(pos) = surfaces.iter().position(|t| t.label == label) else {
            continue;
        };
        let idx = order(label);
        let mut rows = surfaces[pos].rows.clone();
        for col in 0..width {
            let Some(mut row) = rows[col] else { continue };
            for (fi, frows) in &fixed {
                if let Some(fr) = frows[col] {
                    if *fi < idx {
                        row = row.max(fr);
                    } else {
                        row = row.min(fr);
                    }
                }
            }
            rows[col] = Some(row);
        }
        surfaces[pos].rows = rows.clone();
        fixed.push((idx, rows));
    }
}

/// Expected sign of the vertical intensity transition at each surface in
/// the denoised image: +1 where the tissue below is brighter.
fn surface_polarity(label: SurfaceLabel) -> Option<f64> {
    match label {
        SurfaceLabel::S1 => Some(1.0),  // vitreous -> NFL
        SurfaceLabel::S2 => Some(-1.0), // NFL -> IPL/GCL
        SurfaceLabel::S3 => Some(1.0), // IPL/GCL -> INL (INL brighter)
        SurfaceLabel::S4 => Some(1.0),  // INL -> ONL
        SurfaceLabel::S5 => Some(1.0),  // ONL -> IS/OS
        SurfaceLabel::S6 => Some(1.0),  // IS/OS seam -> RPE
        SurfaceLabel::S7 => Some(-1.0), // RPE -> choroid
        SurfaceLabel::Choroid => None,  // fading boundary, left as traced
    }
}

/// Move each traced row to the strongest nearby vertical gradient of the
/// surface's expected polarity. Region boundaries localize surfaces only up
/// to the filter and threshold geometry; the gradient extremum of the
/// denoised column profile is the unbiased edge estimate.
fn refine_surfaces(denoised: &Image, surfaces: &mut [SurfaceTrace], cfg: &SegmentConfig) {
    let radius = cfg.refine_radius_px;
    if radius == 0 {
        return;
    }
    let (w, h) = (denoised.width(), denoised.height());
    if h < 3 {
        return;
    }
    // lateral smoothing: surface edges are laterally coherent, residual
    // speckle is not
    let row_taps = gaussian_taps(49, 12.0);
    let col_taps = gaussian_taps(9, 2.0);
    let smooth = convolve_separable(denoised, &row_taps, &col_taps);
    let mut grad = vec![0.0f64; w * h];
    for r in 1..h - 1 {
        for c in 0..w {
            grad[r * w + c] = (smooth.get(r + 1, c) - smooth.get(r - 1, c)) / 2.0;
        }
    }
    // median pre-smoothing: region tracing leaves isolated dropout
    // columns whose raw row lies outside the refinement window
    for trace in surfaces.iter_mut() {
        if surface_polarity(trace.label).is_some() {
            median_smooth_trace(trace, cfg.trace_median_px);
        }
    }
    // snapshot for ordering clamps: a surface's window must not cross its
    // anatomical neighbours, or the search can lock onto a stronger edge
    // one band over
    let snapshot: Vec<(SurfaceLabel, Vec<Option<usize>>)> = surfaces
        .iter()
        .map(|t| (t.label, t.rows.clone()))
        .collect();
    let neighbor = |label: SurfaceLabel, step: isize, c: usize| -> Option<usize> {
        let idx = SurfaceLabel::SURFACES.iter().position(|&l| l == label)? as isize + step;
        if idx < 0 || idx as usize >= SurfaceLabel::SURFACES.len() {
            return None;
        }
        let want = SurfaceLabel::SURFACES[idx as usize];
        snapshot
            .iter()
            .find(|(l, _)| *l == want)
            .and_then(|(_, rows)| rows[c])
    };
    for trace in surfaces.iter_mut() {
        let Some(p) = surface_polarity(trace.label) else {
            continue;
        };
        for c in 0..w {
            let Some(r) = trace.rows[c] else { continue };
            let mut lo = r.saturating_sub(radius).max(1);
            let mut hi = (r + radius).min(h - 2);
            if let Some(prev) = neighbor(trace.label, -1, c) {
                lo = lo.max(prev + 2);
            }
            if let Some(next) = neighbor(trace.label, 1, c) {
                hi = hi.min(next.saturating_sub(2));
            }
            if lo > hi {
                continue;
            }
            let mut best_row = r;
            let mut best = f64::NEG_INFINITY;
            for rr in lo..=hi {
                let v = p * grad[rr * w + c];
                if v > best {
                    best = v;
                    best_row = rr;
                }
            }
            if best >= cfg.refine_min_grad {
                // sub-pixel vertex of the gradient peak; the boundary row
                // convention is "first row of the deeper band", half a pixel
                // below the blurred edge center
                let mut vertex = best_row as f64;
                if best_row > lo && best_row < hi {
                    let g0 = p * grad[(best_row - 1) * w + c];
                    let g2 = p * grad[(best_row + 1) * w + c];
                    let denom = g0 - 2.0 * best + g2;
                    if denom < -1e-12 {
                        vertex += 0.5 * (g0 - g2) / denom;
                    }
                }
                let row = (vertex + 0.5).round().clamp(1.0, (h - 2) as f64) as usize;
                trace.rows[c] = Some(row);
            }
        }
    }
}

/// Replace each defined trace row with the median of defined rows in a
/// centered window of `width` columns.
fn median_smooth_trace(trace: &mut SurfaceTrace, width: usize) {
    if width < 3 {
        return;
    }
    let half = width / 2;
    let n = trace.rows.len();
    let rows = trace.rows.clone();
    for c in 0..n {
        if rows[c].is_none() {
            continue;
        }
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(n - 1);
        let mut vals: Vec<usize> = (lo..=hi).filter_map(|i| rows[i]).collect();
        vals.sort_unstable();
        trace.rows[c] = Some(vals[vals.len() / 2]);
    }
}

/// Run the full six-iteration segmentation on a unit-range denoised image.
pub fn segment(denoised: &Image, cfg: &SegmentConfig) -> Result<SegmentationResult> {
    let (w, h) = (denoised.width(), denoised.height());
    let negative = denoised.map(IntensityRange::Unit, |v| 1.0 - v);
    let mut surfaces: Vec<SurfaceTrace> = Vec::new();
    let mut per_iteration = Vec::new();

    let find = |surfaces: &[SurfaceTrace], l: SurfaceLabel| -> Result<SurfaceTrace> {
        surfaces
            .iter()
            .find(|t| t.label == l)
            .cloned()
            .ok_or(OctError::NoCandidateRegion(0))
    };

    for spec in iteration_table(cfg) {
        let src = match spec.source {
            SourceSelector::Denoised => denoised,
            SourceSelector::Negative => &negative,
        };
        // the padded mask gives filter windows real context above the band;
        // thresholding and selection stay inside the unpadded band so the
        // pad cut cannot contribute candidate regions
        let (mask, select_mask) = match spec.mask_rule {
            MaskRule::WholeImage => {
                let m = Mask::filled(w, h, true);
                (m.clone(), m)
            }
            MaskRule::Between(a, b) => {
                let upper = find(&surfaces, a)?;
                let lower = find(&surfaces, b)?;
                (
                    mask_between(
                        &upper,
                        &lower,
                        w,
                        h,
                        spec.pad_bottom + spec.pad_bottom_context,
                        spec.pad_top,
                        0,
                        0,
                    )?,
                    mask_between(
                        &upper,
                        &lower,
                        w,
                        h,
                        spec.pad_bottom,
                        0,
                        spec.guard_bottom,
                        spec.guard_top,
                    )?,
                )
            }
        };
        if mask.is_empty() {
            return Err(OctError::EmptyRegionOfInterest(spec.index));
        }
        let filtered = highpass_step(src, &mask, spec.filter_rule, cfg)
            .map_err(|_| OctError::EmptyRegionOfInterest(spec.index))?;
        let binary = threshold_step(&filtered, &select_mask, spec.threshold_rule, cfg, spec.index)?;
        let s1_extent = surfaces
            .iter()
            .find(|t| t.label == SurfaceLabel::S1)
            .map(|t| t.x_extent())
            .unwrap_or(w);
        let merge_gap = match spec.index {
            2 => Some(cfg.complex_merge_gap_px),
            4 => Some(cfg.s4_merge_gap_px),
            5 => Some(cfg.s3_merge_gap_px),
            _ => None,
        };
        let strength = (spec.index == 2).then_some((&filtered, cfg.merge_strength_frac));
        let selection = select_regions_with_merge(
            &binary,
            spec.criterion,
            s1_extent,
            cfg.min_region_px,
            spec.index,
            merge_gap,
            strength,
        )?;
        for &(side, label) in spec.outputs {
            let mut trace = trace_surface(&selection.mask, side, label);
            if label == SurfaceLabel::S1 {
                trace = fill_trace(&trace);
            }
            surfaces.push(trace);
        }
        per_iteration.push(IterationDiagnostics {
            index: spec.index,
            regions_used: selection.regions_used,
            exception_fired: selection.exception_fired,
            filtered: cfg.keep_diagnostics.then(|| filtered.clone()),
            binary: cfg.keep_diagnostics.then(|| selection.mask.clone()),
        });
    }

    repair_ordering(&mut surfaces);
    refine_surfaces(denoised, &mut surfaces, cfg);
    repair_ordering(&mut surfaces);
    // canonical order S1..S7 then choroid
    surfaces.sort_by_key(|t| SurfaceLabel::ALL.iter().position(|&l| l == t.label));
    let mut result = SegmentationResult::new(surfaces);
    result.per_iteration = per_iteration;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_source_gives_zero_highpass() {
        let img = Image::filled(32, 32, IntensityRange::Unit, 0.4).unwrap();
        let mask = Mask::filled(32, 32, true);
        let cfg = SegmentConfig::default();
        let out = highpass_step(&img, &mask, FilterRule::BoxHighpass(5), &cfg).unwrap();
        for &v in out.pixels() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn step_edge_responds_at_the_step() {
        // vertical step: analytic response of x - box(x) for a 1-D step
        // replicated per row: antisymmetric around the edge, zero far away
        let (w, h) = (64, 16);
        let data: Vec<f64> = (0..w * h)
            .map(|i| if (i % w) < 32 { 0.0 } else { 1.0 })
            .collect();
        let img = Image::new(w, h, IntensityRange::Unit, data).unwrap();
        let mask = Mask::filled(w, h, true);
        let cfg = SegmentConfig::default();
        let out = highpass_step(&img, &mask, FilterRule::BoxHighpass(25), &cfg).unwrap();
        let r = h / 2;
        // zero far from the edge
        assert!(out.get(r, 5).abs() < 1e-9);
        assert!(out.get(r, w - 5).abs() < 1e-9);
        // signed response at the edge, matching the 1-D analytic value
        for offset in 0..12usize {
            let c_right = 32 + offset;
            // box window of 25 centered at c covers 12 left, 12 right
            let ones_in_window = (c_right + 12).min(w - 1) as isize - 31;
            let expect = 1.0 - ones_in_window as f64 / 25.0;
            assert!((out.get(r, c_right) - expect).abs() < 1e-9);
        }
        assert!(out.get(r, 31) < 0.0 && out.get(r, 32) > 0.0);
    }

    #[test]
    fn small_masked_region_stays_finite() {
        let img = Image::filled(32, 32, IntensityRange::Unit, 0.7).unwrap();
        let mut mask = Mask::filled(32, 32, false);
        for r in 10..13 {
            for c in 10..13 {
                mask.set(r, c, true);
            }
        }
        let cfg = SegmentConfig::default();
        let out = highpass_step(&img, &mask, FilterRule::BoxHighpass(25), &cfg).unwrap();
        assert!(out.pixels().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_mask_rejected() {
        let img = Image::filled(16, 16, IntensityRange::Unit, 0.5).unwrap();
        let mask = Mask::filled(16, 16, false);
        let cfg = SegmentConfig::default();
        assert!(highpass_step(&img, &mask, FilterRule::BoxHighpass(25), &cfg).is_err());
    }

    #[test]
    fn mask_between_uses_interpolated_bounds() {
        let upper = SurfaceTrace::new(SurfaceLabel::S1, vec![Some(2), None, Some(4), None]);
        let lower = SurfaceTrace::new(SurfaceLabel::S5, vec![Some(6), None, Some(8), None]);
        let mask = mask_between(&upper, &lower, 4, 12, 0, 0, 0, 0).unwrap();
        // column 1 interpolates to rows 3..=7
        assert!(mask.get(3, 1) && mask.get(7, 1));
        assert!(!mask.get(2, 1) && !mask.get(8, 1));
        // column 3 extrapolates the nearest values (rows 4..=8)
        assert!(mask.get(4, 3) && mask.get(8, 3));
    }

    #[test]
    fn repair_clips_later_surface_to_earlier() {
        let mut surfaces = vec![
            SurfaceTrace::new(SurfaceLabel::S1, vec![Some(10); 4]),
            SurfaceTrace::new(SurfaceLabel::S5, vec![Some(30); 4]),
            // S3 wrongly dips below S5 at column 2
            SurfaceTrace::new(
                SurfaceLabel::S3,
                vec![Some(20), Some(20), Some(35), Some(20)],
            ),
        ];
        repair_ordering(&mut surfaces);
        let s3 = surfaces.iter().find(|t| t.label == SurfaceLabel::S3).unwrap();
        assert_eq!(s3.rows[2], Some(30));
        assert_eq!(s3.rows[0], Some(20));
    }

    #[test]
    fn ordering_holds_detects_violation() {
        let good = SegmentationResult::new(vec![
            SurfaceTrace::new(SurfaceLabel::S1, vec![Some(1); 3]),
            SurfaceTrace::new(SurfaceLabel::S2, vec![Some(2); 3]),
        ]);
        assert!(good.ordering_holds());
        let bad = SegmentationResult::new(vec![
            SurfaceTrace::new(SurfaceLabel::S1, vec![Some(5); 3]),
            SurfaceTrace::new(SurfaceLabel::S2, vec![Some(2); 3]),
        ]);
        assert!(!bad.ordering_holds());
    }
}
