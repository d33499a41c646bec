//! Batch front door: denoise → segment → thickness → metrics per image,
//! stack-level thickness aggregation, and A/B configuration comparison.
//!
//! Images are processed on a bounded rayon pool; every artifact is written
//! atomically and one image's failure never aborts the batch — failures are
//! collected into an error manifest and reflected in the process exit code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Denoiser, PipelineConfig};
use crate::denoise::{denoise, wavelet_denoise_baseline, NoiseEstimate};
use crate::error::Result;
use crate::io::{self, EstReport, LayerReport, MetricsReport, SCHEMA_VERSION};
use crate::metrics::{
    agreement, cnr, foreground_mask, psnr, snr, surface_error, thickness, ForegroundSpec, Layer,
    ThicknessProfile,
};
use crate::segment::{segment, SegmentationResult};
use crate::trace::{SurfaceLabel, SurfaceTrace};
use crate::Image;

/// Everything computed for a single image, before any file is written.
#[derive(Debug, Clone)]
pub struct ProcessedImage {
    pub denoised: Image,
    /// Present only for the blind Wiener denoiser.
    pub estimate: Option<NoiseEstimate>,
    pub segmentation: SegmentationResult,
    pub report: MetricsReport,
    /// Per-layer thickness, µm per column.
    pub thickness: Vec<ThicknessProfile>,
}

/// Denoise, segment and measure one image in memory.
///
/// When `reference` surfaces are given they define the metrics foreground
/// and anchor per-surface error and thickness-agreement statistics;
/// otherwise the automated surfaces stand in and agreement is omitted.
pub fn process_image(
    input: &Image,
    cfg: &PipelineConfig,
    reference: Option<&[SurfaceTrace]>,
) -> Result<ProcessedImage> {
    let (denoised, estimate) = match cfg.denoiser {
        Denoiser::FourierWiener => {
            let (img, est) = denoise(input, &cfg.denoise)?;
            (img, Some(est))
        }
        Denoiser::WaveletBaseline => (wavelet_denoise_baseline(input, cfg.wavelet_levels), None),
        Denoiser::None => (input.clone(), None),
    };
    let segmentation = segment(&denoised, &cfg.segment)?;
    let (report, profiles) = build_report(input, &denoised, &segmentation, cfg, reference)?;
    Ok(ProcessedImage {
        denoised,
        estimate,
        segmentation,
        report,
        thickness: profiles,
    })
}

fn find_surface<'a>(traces: &'a [SurfaceTrace], label: SurfaceLabel) -> Option<&'a SurfaceTrace> {
    traces.iter().find(|t| t.label == label)
}

/// Assemble the metrics report plus per-layer thickness profiles.
fn build_report(
    input: &Image,
    denoised: &Image,
    segmentation: &SegmentationResult,
    cfg: &PipelineConfig,
    reference: Option<&[SurfaceTrace]>,
) -> Result<(MetricsReport, Vec<ThicknessProfile>)> {
    let (w, h) = (denoised.width(), denoised.height());

    // Foreground geometry prefers the reference surfaces when available so
    // quality numbers are comparable across methods; the report records
    // which was used.
    let (fg_s1, fg_s7, foreground_from) = match reference {
        Some(manual)
            if find_surface(manual, SurfaceLabel::S1).is_some()
                && find_surface(manual, SurfaceLabel::S7).is_some() =>
        {
            (
                find_surface(manual, SurfaceLabel::S1).unwrap(),
                find_surface(manual, SurfaceLabel::S7).unwrap(),
                "reference",
            )
        }
        _ => (
            segmentation
                .surface(SurfaceLabel::S1)
                .ok_or(crate::OctError::NoCandidateRegion(1))?,
            segmentation
                .surface(SurfaceLabel::S7)
                .ok_or(crate::OctError::NoCandidateRegion(6))?,
            "automated",
        ),
    };
    let fg = foreground_mask(&ForegroundSpec::default(), fg_s1, fg_s7, w, h)?;

    let snr_db = snr(denoised, &fg).ok();
    let cnr_val = cnr(denoised, &fg).ok();
    let psnr_db = psnr(input, denoised).ok();

    let mut per_surface_error_um = BTreeMap::new();
    if let Some(manual) = reference {
        for &label in &SurfaceLabel::SURFACES {
            if let (Some(auto), Some(man)) =
                (segmentation.surface(label), find_surface(manual, label))
            {
                if let Ok(err) = surface_error(auto, man, &cfg.resolution) {
                    per_surface_error_um.insert(label.name().to_string(), err.mean_um);
                }
            }
        }
    }

    let mut per_layer = Vec::new();
    let mut profiles = Vec::new();
    for layer in Layer::ALL {
        let (upper, lower) = layer.bounds();
        let (Some(a), Some(b)) = (segmentation.surface(upper), segmentation.surface(lower)) else {
            continue;
        };
        let Ok(profile) = thickness(a, b, &cfg.resolution) else {
            continue;
        };
        let agree = reference.and_then(|manual| {
            let ma = find_surface(manual, upper)?;
            let mb = find_surface(manual, lower)?;
            let ref_profile = thickness(ma, mb, &cfg.resolution).ok()?;
            agreement(&profile, &ref_profile).ok()
        });
        per_layer.push(LayerReport {
            layer: layer.name().to_string(),
            mean_um: profile.mean_um,
            sd_um: profile.sd_um,
            r: agree.map(|a| a.r),
            r2: agree.map(|a| a.r2),
        });
        profiles.push(profile);
    }

    Ok((
        MetricsReport {
            schema_version: SCHEMA_VERSION,
            snr_db,
            cnr: cnr_val,
            psnr_db,
            foreground_from: foreground_from.to_string(),
            per_surface_error_um,
            per_layer,
        },
        profiles,
    ))
}

/// Metrics for an already-segmented image: quality numbers over the given
/// surfaces plus thickness statistics, with agreement when a reference is
/// supplied. PSNR needs a noisy/denoised pair and is omitted here.
pub fn metrics_report(
    image: &Image,
    surfaces: &[SurfaceTrace],
    reference: Option<&[SurfaceTrace]>,
    cfg: &PipelineConfig,
) -> Result<MetricsReport> {
    let seg = SegmentationResult::new(surfaces.to_vec());
    let (report, _) = build_report(image, image, &seg, cfg, reference)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Batch runs
// ---------------------------------------------------------------------------

/// Outcome of one image within a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub input: PathBuf,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Batch result: per-image outcomes plus the error manifest path, if any.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub outcomes: Vec<ImageOutcome>,
    pub failed: usize,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.failed == 0
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

fn process_one_to_disk(
    input: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<ThicknessProfile>> {
    let img = io::read_image(input)?;
    let processed = process_image(&img, cfg, None)?;
    let stem = stem_of(input);
    io::write_png(&out_dir.join(format!("{stem}.denoised.png")), &processed.denoised)?;
    if let Some(est) = &processed.estimate {
        let report = EstReport {
            schema_version: SCHEMA_VERSION,
            k: est.k,
            a: est.a,
            nsr: est.nsr,
            error_surface: est.error_surface.clone(),
            k_min: est.k_min,
        };
        io::write_json(&out_dir.join(format!("{stem}.est.json")), &report)?;
    }
    io::write_surfaces_csv(
        &out_dir.join(format!("{stem}.surfaces.csv")),
        processed.segmentation.surfaces(),
    )?;
    io::write_json(&out_dir.join(format!("{stem}.report.json")), &processed.report)?;
    Ok(processed.thickness)
}

/// Stack-level thickness CSV: `image_index,column,layer,thickness_um`, one
/// line per defined column of each layer of each image.
fn stack_thickness_csv(per_image: &[(usize, Vec<ThicknessProfile>)]) -> String {
    let mut out = String::from("image_index,column,layer,thickness_um\n");
    for (index, profiles) in per_image {
        for profile in profiles {
            for (col, um) in profile.per_column_um.iter().enumerate() {
                if let Some(um) = um {
                    out.push_str(&format!("{index},{col},{},{um:.3}\n", profile.label));
                }
            }
        }
    }
    out
}

/// Render one layer's stack thickness map: columns along x, images along y
/// (each image drawn as a `row_height`-pixel band), brightness proportional
/// to thickness with the map's own maximum as white.
fn render_thickness_map(
    per_image: &[(usize, Vec<ThicknessProfile>)],
    layer: &str,
    width: usize,
) -> Option<image::GrayImage> {
    let rows: Vec<(usize, &ThicknessProfile)> = per_image
        .iter()
        .filter_map(|(i, profiles)| profiles.iter().find(|p| p.label == layer).map(|p| (*i, p)))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let max_um = rows
        .iter()
        .flat_map(|(_, p)| p.per_column_um.iter().flatten())
        .fold(0.0f64, |m, &v| m.max(v));
    let row_height = 8usize;
    let mut img = image::GrayImage::new(width as u32, (rows.len() * row_height) as u32);
    for (band, (_, profile)) in rows.iter().enumerate() {
        for col in 0..width.min(profile.per_column_um.len()) {
            let v = profile.per_column_um[col].unwrap_or(0.0);
            let shade = if max_um > 0.0 {
                (v / max_um * 255.0).round() as u8
            } else {
                0
            };
            for dy in 0..row_height {
                img.put_pixel(col as u32, (band * row_height + dy) as u32, image::Luma([shade]));
            }
        }
    }
    Some(img)
}

fn safe_layer_filename(layer: &str) -> String {
    layer
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '+' || c == '-' { c } else { '_' })
        .collect()
}

/// Process a stack of images into `out_dir`.
///
/// Per image: denoised PNG, noise-estimate JSON, surfaces CSV and metrics
/// report JSON. Per stack: `thickness.csv` (image_index × column × layer)
/// and a thickness-map PNG per layer. Failures are recorded in
/// `errors.json` and the summary, not propagated; callers map
/// `RunSummary::all_ok` to the exit code.
pub fn run_pipeline(inputs: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;

    let worker = |(index, input): (usize, &PathBuf)| -> (usize, ImageOutcome, Vec<ThicknessProfile>) {
        match process_one_to_disk(input, out_dir, cfg) {
            Ok(profiles) => (
                index,
                ImageOutcome {
                    input: input.clone(),
                    ok: true,
                    error: None,
                },
                profiles,
            ),
            Err(e) => (
                index,
                ImageOutcome {
                    input: input.clone(),
                    ok: false,
                    error: Some(e.to_string()),
                },
                Vec::new(),
            ),
        }
    };

    let mut results: Vec<(usize, ImageOutcome, Vec<ThicknessProfile>)> = if cfg.parallelism == 1 {
        inputs.iter().enumerate().map(worker).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| crate::OctError::Parse {
                what: "thread pool".into(),
                detail: e.to_string(),
            })?;
        pool.install(|| inputs.par_iter().enumerate().map(worker).collect())
    };
    results.sort_by_key(|(i, _, _)| *i);

    let per_image: Vec<(usize, Vec<ThicknessProfile>)> = results
        .iter()
        .filter(|(_, o, _)| o.ok)
        .map(|(i, _, p)| (*i, p.clone()))
        .collect();

    if !per_image.is_empty() {
        io::atomic_write(
            &out_dir.join("thickness.csv"),
            stack_thickness_csv(&per_image).as_bytes(),
        )?;
        let width = per_image
            .iter()
            .flat_map(|(_, ps)| ps.iter().map(|p| p.per_column_um.len()))
            .max()
            .unwrap_or(0);
        for layer in Layer::ALL {
            if let Some(map) = render_thickness_map(&per_image, layer.name(), width) {
                let mut bytes = Vec::new();
                map.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                    .map_err(|e| crate::OctError::Parse {
                        what: "png".into(),
                        detail: e.to_string(),
                    })?;
                let name = format!("thickness_map.{}.png", safe_layer_filename(layer.name()));
                io::atomic_write(&out_dir.join(name), &bytes)?;
            }
        }
    }

    let outcomes: Vec<ImageOutcome> = results.into_iter().map(|(_, o, _)| o).collect();
    let failed = outcomes.iter().filter(|o| !o.ok).count();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        outcomes,
        failed,
    };
    if failed > 0 {
        io::write_json(&out_dir.join("errors.json"), &summary)?;
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Configuration comparison
// ---------------------------------------------------------------------------

/// One configuration's aggregate metrics within a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSide {
    pub config: PipelineConfig,
    pub images: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_cnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_psnr_db: Option<f64>,
    /// Mean absolute surface error vs truth, µm, averaged over images.
    pub per_surface_error_um: BTreeMap<String, f64>,
    /// Layer → (mean thickness µm, mean r), averaged over images.
    pub per_layer: Vec<LayerReport>,
    pub failures: Vec<String>,
}

/// Side-by-side comparison of two configurations over the same inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub a: ComparisonSide,
    pub b: ComparisonSide,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn run_side(
    inputs: &[(PathBuf, Option<PathBuf>)],
    cfg: &PipelineConfig,
) -> Result<ComparisonSide> {
    let mut snrs = Vec::new();
    let mut cnrs = Vec::new();
    let mut psnrs = Vec::new();
    let mut surface_sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut layer_sums: BTreeMap<String, (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> =
        BTreeMap::new();
    let mut failures = Vec::new();
    let mut images = 0usize;

    for (input, truth) in inputs {
        let outcome = (|| -> Result<MetricsReport> {
            let img = io::read_image(input)?;
            let reference = truth
                .as_ref()
                .map(|p| io::read_surfaces_csv(p))
                .transpose()?;
            let processed = process_image(&img, cfg, reference.as_deref())?;
            Ok(processed.report)
        })();
        match outcome {
            Ok(report) => {
                images += 1;
                if let Some(v) = report.snr_db {
                    snrs.push(v);
                }
                if let Some(v) = report.cnr {
                    cnrs.push(v);
                }
                if let Some(v) = report.psnr_db {
                    psnrs.push(v);
                }
                for (surface, err) in report.per_surface_error_um {
                    surface_sums.entry(surface).or_default().push(err);
                }
                for layer in report.per_layer {
                    let entry = layer_sums.entry(layer.layer).or_default();
                    entry.0.push(layer.mean_um);
                    entry.1.push(layer.sd_um);
                    if let Some(r) = layer.r {
                        entry.2.push(r);
                    }
                    if let Some(r2) = layer.r2 {
                        entry.3.push(r2);
                    }
                }
            }
            Err(e) => failures.push(format!("{}: {e}", input.display())),
        }
    }

    let per_surface_error_um = surface_sums
        .into_iter()
        .filter_map(|(k, v)| mean_of(&v).map(|m| (k, m)))
        .collect();
    let per_layer = layer_sums
        .into_iter()
        .map(|(layer, (means, sds, rs, r2s))| LayerReport {
            layer,
            mean_um: mean_of(&means).unwrap_or(f64::NAN),
            sd_um: mean_of(&sds).unwrap_or(f64::NAN),
            r: mean_of(&rs),
            r2: mean_of(&r2s),
        })
        .collect();

    Ok(ComparisonSide {
        config: cfg.clone(),
        images,
        mean_snr_db: mean_of(&snrs),
        mean_cnr: mean_of(&cnrs),
        mean_psnr_db: mean_of(&psnrs),
        per_surface_error_um,
        per_layer,
        failures,
    })
}

/// Run two configurations over the same inputs (each optionally paired with
/// a truth surfaces CSV) and report their metrics side by side.
pub fn compare(
    inputs: &[(PathBuf, Option<PathBuf>)],
    cfg_a: &PipelineConfig,
    cfg_b: &PipelineConfig,
) -> Result<ComparisonReport> {
    Ok(ComparisonReport {
        schema_version: SCHEMA_VERSION,
        a: run_side(inputs, cfg_a)?,
        b: run_side(inputs, cfg_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate, preset};

    fn small_phantom() -> (Image, Vec<SurfaceTrace>) {
        let spec = preset("normal", 192, 256).unwrap();
        let out = generate(&spec).unwrap();
        (out.noisy, out.truth.surfaces().to_vec())
    }

    #[test]
    fn process_image_produces_report_and_thickness() {
        let (img, truth) = small_phantom();
        let mut cfg = PipelineConfig::default();
        cfg.denoise.k_max = 6; // keep the sweep short
        let processed = process_image(&img, &cfg, Some(&truth)).unwrap();
        assert_eq!(processed.report.foreground_from, "reference");
        assert!(processed.report.snr_db.is_some());
        assert!(!processed.report.per_layer.is_empty());
        assert!(!processed.thickness.is_empty());
        assert!(processed.estimate.is_some());
    }

    #[test]
    fn run_pipeline_writes_artifacts_and_survives_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = small_phantom();
        let input = dir.path().join("scan0.png");
        io::write_png(&input, &img).unwrap();
        let missing = dir.path().join("missing.png");

        let mut cfg = PipelineConfig::default();
        cfg.denoise.k_max = 6;
        cfg.parallelism = 1;
        let out_dir = dir.path().join("out");
        let summary = run_pipeline(&[input, missing], &out_dir, &cfg).unwrap();

        assert_eq!(summary.outcomes.len(), 2);
        assert_eq!(summary.failed, 1);
        assert!(!summary.all_ok());
        assert!(out_dir.join("scan0.denoised.png").exists());
        assert!(out_dir.join("scan0.surfaces.csv").exists());
        assert!(out_dir.join("scan0.report.json").exists());
        assert!(out_dir.join("scan0.est.json").exists());
        assert!(out_dir.join("thickness.csv").exists());
        assert!(out_dir.join("errors.json").exists());
        assert!(out_dir.join("thickness_map.NFL.png").exists());
    }

    #[test]
    fn stack_csv_has_expected_shape() {
        let profile = ThicknessProfile {
            label: "NFL".into(),
            per_column_um: vec![Some(10.0), None, Some(12.5)],
            mean_um: 11.25,
            sd_um: 1.25,
            negatives_clamped: 0,
        };
        let csv = stack_thickness_csv(&[(0, vec![profile])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "image_index,column,layer,thickness_um");
        assert_eq!(lines[1], "0,0,NFL,10.000");
        assert_eq!(lines[2], "0,2,NFL,12.500");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn compare_identical_configs_match() {
        let dir = tempfile::tempdir().unwrap();
        let (img, truth) = small_phantom();
        let input = dir.path().join("scan.png");
        io::write_png(&input, &img).unwrap();
        let truth_path = dir.path().join("truth.csv");
        io::write_surfaces_csv(&truth_path, &truth).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.denoise.k_max = 6;
        let report = compare(
            &[(input, Some(truth_path))],
            &cfg,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.a.images, 1);
        assert_eq!(report.a.mean_snr_db, report.b.mean_snr_db);
        assert_eq!(report.a.per_surface_error_um, report.b.per_surface_error_um);
    }
}
