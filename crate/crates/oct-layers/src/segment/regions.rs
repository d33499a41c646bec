//! Binary-region machinery: seeded region growing, Otsu thresholding,
//! connected components with shape properties, region selection with the
//! discontinuity exception rule, and surface tracing.

use crate::error::{OctError, Result};
use crate::image::{Image, Mask};
use crate::trace::{SurfaceLabel, SurfaceTrace};

/// 4-connected flood fill from every pixel at the image maximum (255 after
/// byte rescale), absorbing neighbors at or above `threshold`.
pub fn region_grow(img: &Image, threshold: f64) -> Result<Mask> {
    region_grow_from(img, img.max(), threshold)
}

/// 4-connected flood fill from every pixel >= `seed_level`, absorbing
/// neighbors >= `threshold`.
pub fn region_grow_from(img: &Image, seed_level: f64, threshold: f64) -> Result<Mask> {
    let (w, h) = (img.width(), img.height());
    let mut grown = Mask::filled(w, h, false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if img.get(r, c) >= seed_level {
                stack.push((r, c));
                grown.set(r, c, true);
            }
        }
    }
    if stack.is_empty() {
        return Err(OctError::NoSeedPixel);
    }
    while let Some((r, c)) = stack.pop() {
        let visit = |rr: usize, cc: usize, grown: &mut Mask, stack: &mut Vec<(usize, usize)>| {
            if !grown.get(rr, cc) && img.get(rr, cc) >= threshold {
                grown.set(rr, cc, true);
                stack.push((rr, cc));
            }
        };
        if r > 0 {
            visit(r - 1, c, &mut grown, &mut stack);
        }
        if r + 1 < h {
            visit(r + 1, c, &mut grown, &mut stack);
        }
        if c > 0 {
            visit(r, c - 1, &mut grown, &mut stack);
        }
        if c + 1 < w {
            visit(r, c + 1, &mut grown, &mut stack);
        }
    }
    Ok(grown)
}

/// Otsu's threshold over a 256-bin histogram of the masked pixels of a
/// byte-range image. Returns the between-class-variance maximizer; ties
/// resolve to the lowest threshold.
pub fn otsu_threshold(img: &Image, mask: &Mask) -> Result<f64> {
    mask.matches(img)?;
    let mut hist = [0u64; 256];
    let mut seen_lo = f64::INFINITY;
    let mut seen_hi = f64::NEG_INFINITY;
    for r in 0..img.height() {
        for c in 0..img.width() {
            if mask.get(r, c) {
                let v = img.get(r, c).clamp(0.0, 255.0);
                seen_lo = seen_lo.min(v);
                seen_hi = seen_hi.max(v);
                hist[v.round().min(255.0) as usize] += 1;
            }
        }
    }
    let total: u64 = hist.iter().sum();
    if total == 0 || (seen_hi - seen_lo).abs() < f64::EPSILON {
        return Err(OctError::DegenerateHistogram);
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &n)| i as f64 * n as f64)
        .sum();
    let mut best_t = 0usize;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    for t in 0..256 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total as f64 - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    Ok(best_t as f64)
}

/// One 8-connected component with its shape statistics.
#[derive(Debug, Clone)]
pub struct Region {
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    /// Major axis of the second-central-moment equivalent ellipse.
    pub major_axis_length: f64,
    pub min_col: usize,
    pub max_col: usize,
    pub min_row: usize,
    pub max_row: usize,
}

impl Region {
    pub fn x_extent(&self) -> usize {
        self.max_col - self.min_col + 1
    }
}

fn region_props(pixels: Vec<(usize, usize)>) -> Region {
    let area = pixels.len();
    let n = area as f64;
    let (mut sr, mut sc) = (0.0f64, 0.0f64);
    let (mut min_col, mut max_col, mut min_row, mut max_row) =
        (usize::MAX, 0usize, usize::MAX, 0usize);
    for &(r, c) in &pixels {
        sr += r as f64;
        sc += c as f64;
        min_col = min_col.min(c);
        max_col = max_col.max(c);
        min_row = min_row.min(r);
        max_row = max_row.max(r);
    }
    let (mr, mc) = (sr / n, sc / n);
    let (mut mrr, mut mcc, mut mrc) = (0.0f64, 0.0f64, 0.0f64);
    for &(r, c) in &pixels {
        let dr = r as f64 - mr;
        let dc = c as f64 - mc;
        mrr += dr * dr;
        mcc += dc * dc;
        mrc += dr * dc;
    }
    // normalized central moments of the pixel set, each pixel treated as a
    // unit square (the + 1/12 term)
    mrr = mrr / n + 1.0 / 12.0;
    mcc = mcc / n + 1.0 / 12.0;
    mrc /= n;
    let common = ((mrr - mcc) * (mrr - mcc) + 4.0 * mrc * mrc).sqrt();
    let lambda_max = 0.5 * (mrr + mcc + common);
    let major_axis_length = 4.0 * lambda_max.sqrt();
    Region {
        pixels,
        area,
        major_axis_length,
        min_col,
        max_col,
        min_row,
        max_row,
    }
}

/// 8-connected component labeling of a binary mask.
pub fn connected_components(bin: &Mask) -> Vec<Region> {
    let (w, h) = (bin.width(), bin.height());
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    for start_r in 0..h {
        for start_c in 0..w {
            if !bin.get(start_r, start_c) || seen[start_r * w + start_c] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut stack = vec![(start_r, start_c)];
            seen[start_r * w + start_c] = true;
            while let Some((r, c)) = stack.pop() {
                pixels.push((r, c));
                let r0 = r.saturating_sub(1);
                let r1 = (r + 1).min(h - 1);
                let c0 = c.saturating_sub(1);
                let c1 = (c + 1).min(w - 1);
                for rr in r0..=r1 {
                    for cc in c0..=c1 {
                        if bin.get(rr, cc) && !seen[rr * w + cc] {
                            seen[rr * w + cc] = true;
                            stack.push((rr, cc));
                        }
                    }
                }
            }
            regions.push(region_props(pixels));
        }
    }
    regions
}

/// Region ranking criterion of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    MaxArea,
    MaxMajorAxisLength,
    AllRegions,
}

impl Criterion {
    fn score(&self, r: &Region) -> f64 {
        match self {
            Criterion::MaxArea => r.area as f64,
            Criterion::MaxMajorAxisLength => r.major_axis_length,
            Criterion::AllRegions => 0.0,
        }
    }
}

/// Outcome of [`select_regions`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub mask: Mask,
    /// Number of regions merged into the result.
    pub regions_used: usize,
    /// True when the 75%-of-S1 exception added regions beyond the first.
    pub exception_fired: bool,
}

fn union_extent(regions: &[&Region]) -> usize {
    let min = regions.iter().map(|r| r.min_col).min().unwrap_or(0);
    let max = regions.iter().map(|r| r.max_col).max().unwrap_or(0);
    if regions.is_empty() {
        0
    } else {
        max - min + 1
    }
}

/// Pick the criterion argmax; if its x-extent falls short of 75% of S1's
/// extent, keep adding the next-best regions until coverage is reached or
/// candidates run out. `AllRegions` keeps every candidate.
///
/// Criterion ties resolve to the larger area, then the topmost region.
pub fn select_regions(
    bin: &Mask,
    criterion: Criterion,
    s1_x_extent: usize,
    min_region_px: usize,
    iteration: usize,
) -> Result<Selection> {
    select_regions_with_merge(bin, criterion, s1_x_extent, min_region_px, iteration, None, None)
}

/// [`select_regions`] plus an optional downward merge: after the coverage
/// rule, candidates that start below the chosen set's top, overlap it
/// horizontally, and hang within `gap` rows of its bottom are absorbed. A
/// partially resolved anatomical band (e.g. the IS/OS-RPE complex) splits
/// into stacked fragments that must be traced as one region.
pub fn select_regions_with_merge(
    bin: &Mask,
    criterion: Criterion,
    s1_x_extent: usize,
    min_region_px: usize,
    iteration: usize,
    merge_below_gap: Option<usize>,
    strength: Option<(&crate::Image, f64)>,
) -> Result<Selection> {
    let mut regions: Vec<Region> = connected_components(bin)
        .into_iter()
        .filter(|r| r.area >= min_region_px)
        .collect();
    if regions.is_empty() {
        return Err(OctError::NoCandidateRegion(iteration));
    }
    // a thresholded response keeps faint side bands alongside the target;
    // regions far weaker than the strongest candidate are spurious
    if let Some((response, frac)) = strength {
        let mean_abs = |r: &Region| -> f64 {
            r.pixels
                .iter()
                .map(|&(row, col)| response.get(row, col).abs())
                .sum::<f64>()
                / r.area as f64
        };
        let strongest = regions.iter().map(|r| mean_abs(r)).fold(0.0, f64::max);
        let kept: Vec<Region> = regions
            .iter()
            .filter(|r| mean_abs(r) >= frac * strongest)
            .cloned()
            .collect();
        if !kept.is_empty() {
            regions = kept;
        }
    }
    regions.sort_by(|a, b| {
        criterion
            .score(b)
            .partial_cmp(&criterion.score(a))
            .unwrap()
            .then(b.area.cmp(&a.area))
            .then(a.min_row.cmp(&b.min_row))
    });

    let take_all = criterion == Criterion::AllRegions;
    let mut chosen: Vec<&Region> = Vec::new();
    let needed = (0.75 * s1_x_extent as f64).ceil() as usize;
    let mut exception_fired = false;
    for (i, region) in regions.iter().enumerate() {
        if i == 0 || take_all {
            chosen.push(region);
            continue;
        }
        if union_extent(&chosen) >= needed {
            break;
        }
        exception_fired = true;
        chosen.push(region);
    }

    if let Some(gap) = merge_below_gap {
        loop {
            let top = chosen.iter().map(|r| r.min_row).min().unwrap();
            let bottom = chosen.iter().map(|r| r.max_row).max().unwrap();
            let (lo_col, hi_col) = (
                chosen.iter().map(|r| r.min_col).min().unwrap(),
                chosen.iter().map(|r| r.max_col).max().unwrap(),
            );
            let next = regions.iter().find(|r| {
                !chosen.iter().any(|c| std::ptr::eq(*c, *r))
                    && r.min_row > top
                    && r.min_row <= bottom + gap
                    && r.min_col <= hi_col
                    && r.max_col >= lo_col
            });
            match next {
                Some(r) => chosen.push(r),
                None => break,
            }
        }
    }

    let mut mask = Mask::filled(bin.width(), bin.height(), false);
    for region in &chosen {
        for &(r, c) in &region.pixels {
            mask.set(r, c, true);
        }
    }
    Ok(Selection {
        mask,
        regions_used: chosen.len(),
        exception_fired,
    })
}

/// Side of a region to trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSide {
    Top,
    Bottom,
}

/// Per-column min (top) or max (bottom) row of a binary region; columns the
/// region does not intersect stay undefined.
pub fn trace_surface(region: &Mask, side: TraceSide, label: SurfaceLabel) -> SurfaceTrace {
    let (w, h) = (region.width(), region.height());
    let mut rows = vec![None; w];
    for c in 0..w {
        let mut found = None;
        for r in 0..h {
            if region.get(r, c) {
                found = Some(match (side, found) {
                    (TraceSide::Top, None) => r,
                    (TraceSide::Top, Some(prev)) => prev,
                    (TraceSide::Bottom, _) => r,
                });
            }
        }
        rows[c] = found;
    }
    SurfaceTrace::new(label, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityRange;

    fn byte_image(w: usize, h: usize, vals: &[(usize, usize, f64)], bg: f64) -> Image {
        let mut img = Image::assemble(w, h, IntensityRange::Byte, vec![bg; w * h]);
        for &(r, c, v) in vals {
            img.set(r, c, v);
        }
        img
    }

    #[test]
    fn grow_captures_plateau_only() {
        let mut img = Image::assemble(8, 8, IntensityRange::Byte, vec![0.0; 64]);
        for r in 2..5 {
            for c in 2..5 {
                img.set(r, c, 255.0);
            }
        }
        let grown = region_grow(&img, 233.0).unwrap();
        assert_eq!(grown.count(), 9);
        assert!(grown.get(3, 3) && !grown.get(0, 0));
    }

    #[test]
    fn grow_follows_bridge_above_threshold() {
        // 255 peak, a 232 bridge to a 231 blob; threshold 232 takes the
        // bridge but not the blob
        let img = byte_image(
            8,
            8,
            &[(3, 1, 255.0), (3, 2, 232.0), (3, 3, 232.0), (3, 5, 231.0)],
            0.0,
        );
        let grown = region_grow(&img, 232.0).unwrap();
        assert!(grown.get(3, 1) && grown.get(3, 2) && grown.get(3, 3));
        assert!(!grown.get(3, 5));
    }

    #[test]
    fn grow_is_monotone_in_threshold() {
        let img = byte_image(
            8,
            8,
            &[
                (2, 2, 255.0),
                (2, 3, 234.0),
                (2, 4, 231.0),
                (3, 4, 230.0),
                (4, 4, 250.0),
            ],
            10.0,
        );
        let tight = region_grow(&img, 235.0).unwrap();
        let loose = region_grow(&img, 230.0).unwrap();
        for (a, b) in tight.bits().iter().zip(loose.bits()) {
            assert!(!a | b, "grown(235) must be a subset of grown(230)");
        }
    }

    #[test]
    fn otsu_separates_bimodal() {
        let mut data = vec![10.0; 50];
        data.extend(vec![200.0; 50]);
        data.resize(100, 200.0);
        let img = Image::assemble(10, 10, IntensityRange::Byte, data);
        let mask = Mask::filled(10, 10, true);
        let t = otsu_threshold(&img, &mask).unwrap();
        assert!(t >= 10.0 && t < 200.0);
        // brute force over all 256 candidate thresholds
        let oracle = {
            let vals: Vec<f64> = img.pixels().to_vec();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for t in 0..256 {
                let lo: Vec<f64> = vals.iter().copied().filter(|&v| v <= t as f64).collect();
                let hi: Vec<f64> = vals.iter().copied().filter(|&v| v > t as f64).collect();
                if lo.is_empty() || hi.is_empty() {
                    continue;
                }
                let (w0, w1) = (lo.len() as f64, hi.len() as f64);
                let m0 = lo.iter().sum::<f64>() / w0;
                let m1 = hi.iter().sum::<f64>() / w1;
                let var = w0 * w1 * (m0 - m1) * (m0 - m1);
                if var > best.0 {
                    best = (var, t);
                }
            }
            best.1 as f64
        };
        assert_eq!(t, oracle);
    }

    #[test]
    fn otsu_two_extreme_values() {
        let mut data = vec![0.0; 100];
        for v in data.iter_mut().skip(50) {
            *v = 255.0;
        }
        let img = Image::assemble(10, 10, IntensityRange::Byte, data);
        let t = otsu_threshold(&img, &Mask::filled(10, 10, true)).unwrap();
        assert!(t < 255.0);
    }

    #[test]
    fn otsu_single_value_region_errors() {
        let img = Image::assemble(10, 10, IntensityRange::Byte, vec![42.0; 100]);
        assert!(matches!(
            otsu_threshold(&img, &Mask::filled(10, 10, true)),
            Err(OctError::DegenerateHistogram)
        ));
    }

    fn band_mask(w: usize, h: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> Mask {
        let mut m = Mask::filled(w, h, false);
        for r in r0..=r1 {
            for c in c0..=c1 {
                m.set(r, c, true);
            }
        }
        m
    }

    #[test]
    fn single_region_selected_without_exception() {
        let bin = band_mask(20, 20, 5, 8, 0, 19);
        let sel = select_regions(&bin, Criterion::MaxArea, 20, 1, 1).unwrap();
        assert_eq!(sel.regions_used, 1);
        assert!(!sel.exception_fired);
        assert_eq!(sel.mask.count(), 4 * 20);
    }

    #[test]
    fn wide_winner_suppresses_smaller_region() {
        let mut bin = band_mask(20, 20, 5, 9, 0, 15); // area 80, spans 80%
        for r in 15..17 {
            for c in 0..10 {
                bin.set(r, c, true);
            }
        }
        let sel = select_regions(&bin, Criterion::MaxArea, 20, 1, 2).unwrap();
        assert_eq!(sel.regions_used, 1);
        assert!(!sel.mask.get(15, 0));
    }

    #[test]
    fn exception_merges_disjoint_halves() {
        // two regions each spanning 40% of a 20-wide S1 on disjoint ranges
        let mut bin = band_mask(20, 20, 5, 7, 0, 7);
        for r in 5..=7 {
            for c in 12..20 {
                bin.set(r, c, true);
            }
        }
        let sel = select_regions(&bin, Criterion::MaxArea, 20, 1, 3).unwrap();
        assert_eq!(sel.regions_used, 2);
        assert!(sel.exception_fired);
        assert!(sel.mask.get(6, 0) && sel.mask.get(6, 19));
    }

    #[test]
    fn no_components_errors() {
        let bin = Mask::filled(10, 10, false);
        assert!(matches!(
            select_regions(&bin, Criterion::MaxArea, 10, 1, 4),
            Err(OctError::NoCandidateRegion(4))
        ));
    }

    #[test]
    fn trace_band_top_and_bottom() {
        let bin = band_mask(12, 30, 10, 20, 0, 11);
        let top = trace_surface(&bin, TraceSide::Top, SurfaceLabel::S1);
        let bottom = trace_surface(&bin, TraceSide::Bottom, SurfaceLabel::S7);
        assert!(top.rows.iter().all(|&r| r == Some(10)));
        assert!(bottom.rows.iter().all(|&r| r == Some(20)));
    }

    #[test]
    fn trace_tilted_band_is_monotone() {
        let (w, h) = (16, 40);
        let mut bin = Mask::filled(w, h, false);
        for c in 0..w {
            let top = 5 + c; // slope 1
            for r in top..top + 4 {
                bin.set(r, c, true);
            }
        }
        let top = trace_surface(&bin, TraceSide::Top, SurfaceLabel::S2);
        for c in 0..w {
            assert_eq!(top.rows[c], Some(5 + c));
        }
    }

    #[test]
    fn trace_gap_is_undefined() {
        let mut bin = band_mask(15, 15, 4, 6, 0, 14);
        for r in 0..15 {
            for c in 5..10 {
                bin.set(r, c, false);
            }
        }
        let t = trace_surface(&bin, TraceSide::Top, SurfaceLabel::S3);
        for c in 0..15 {
            assert_eq!(t.rows[c].is_none(), (5..10).contains(&c));
        }
    }

    #[test]
    fn major_axis_prefers_elongated_region() {
        let mut bin = band_mask(40, 40, 5, 6, 0, 29); // 30 wide, 2 tall
        for r in 20..28 {
            for c in 0..8 {
                bin.set(r, c, true); // 8x8 blob, larger area
            }
        }
        let sel = select_regions(&bin, Criterion::MaxMajorAxisLength, 0, 1, 5).unwrap();
        assert!(sel.mask.get(5, 15));
        assert!(!sel.mask.get(24, 4));
    }
}
