//! Pipeline configuration: defaults, a key/value config-file grammar, and
//! layered resolution (defaults ← `OCT_LAYERS_CONFIG` ← `--config` ← flags).
//!
//! # Config-file grammar
//!
//! One `key = value` assignment per line. Blank lines and lines starting
//! with `#` are ignored; a trailing `# comment` after the value is not
//! supported (values are taken verbatim after trimming). Keys are
//! dot-namespaced, e.g.:
//!
//! ```text
//! # pixel pitch
//! resolution.lateral_um_per_px = 5.88
//! resolution.axial_um_per_px   = 3.87
//!
//! denoiser = fourier-wiener
//! denoise.rel_eps = 0.2
//! segment.regiongrow_threshold = 200
//! parallelism = 4
//! ```
//!
//! Unknown keys and malformed values are hard errors: a typo silently
//! reverting a tuned threshold to its default would be worse than a refusal
//! to run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoise::DenoiseConfig;
use crate::error::{OctError, Result};
use crate::image::Resolution;
use crate::segment::SegmentConfig;

/// Which denoiser feeds the segmentation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Denoiser {
    /// Wiener deconvolution with blind noise-variance estimation.
    FourierWiener,
    /// Wavelet soft-threshold baseline.
    WaveletBaseline,
    /// Pass the input through unchanged.
    None,
}

impl Denoiser {
    pub fn name(self) -> &'static str {
        match self {
            Denoiser::FourierWiener => "fourier-wiener",
            Denoiser::WaveletBaseline => "wavelet-baseline",
            Denoiser::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Denoiser> {
        match s {
            "fourier-wiener" => Some(Denoiser::FourierWiener),
            "wavelet-baseline" => Some(Denoiser::WaveletBaseline),
            "none" => Some(Denoiser::None),
            _ => None,
        }
    }
}

/// Everything the batch pipeline needs to process one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub resolution: Resolution,
    pub denoiser: Denoiser,
    pub denoise: DenoiseConfig,
    pub segment: SegmentConfig,
    /// Decomposition depth of the wavelet baseline.
    pub wavelet_levels: usize,
    /// Worker-pool width for batch runs; 0 means one thread per core.
    pub parallelism: usize,
    /// Emit per-iteration diagnostic images alongside segmentation output.
    pub diagnostics: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution: Resolution::default(),
            denoiser: Denoiser::FourierWiener,
            denoise: DenoiseConfig::default(),
            segment: SegmentConfig::default(),
            wavelet_levels: 3,
            parallelism: 0,
            diagnostics: false,
        }
    }
}

fn bad_value(key: &str, value: &str, expected: &str) -> OctError {
    OctError::Parse {
        what: "config".into(),
        detail: format!("key `{key}`: expected {expected}, got `{value}`"),
    }
}

macro_rules! numeric_keys {
    ($key:expr, $value:expr, $( $name:literal => $slot:expr => $ty:ty ),+ $(,)?) => {
        match $key {
            $(
                $name => {
                    $slot = $value
                        .parse::<$ty>()
                        .map_err(|_| bad_value($key, $value, stringify!($ty)))?;
                    return Ok(());
                }
            )+
            _ => {}
        }
    };
}

impl PipelineConfig {
    /// Apply one `key = value` assignment. Every key accepted here is also a
    /// valid config-file line and a valid `--set` flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "denoiser" => {
                self.denoiser = Denoiser::parse(value).ok_or_else(|| {
                    bad_value(key, value, "fourier-wiener | wavelet-baseline | none")
                })?;
                return Ok(());
            }
            "diagnostics" => {
                self.diagnostics = parse_bool(value).ok_or_else(|| bad_value(key, value, "bool"))?;
                self.segment.keep_diagnostics = self.diagnostics;
                return Ok(());
            }
            "resolution.lateral_um_per_px" | "resolution.axial_um_per_px" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| bad_value(key, value, "positive number"))?;
                let (lat, ax) = (
                    self.resolution.lateral_um_per_px,
                    self.resolution.axial_um_per_px,
                );
                self.resolution = if key.ends_with("lateral_um_per_px") {
                    Resolution::new(v, ax)?
                } else {
                    Resolution::new(lat, v)?
                };
                return Ok(());
            }
            _ => {}
        }
        numeric_keys!(key, value,
            "wavelet_levels" => self.wavelet_levels => usize,
            "parallelism" => self.parallelism => usize,
            "denoise.rel_eps" => self.denoise.rel_eps => f64,
            "denoise.energy_frac" => self.denoise.energy_frac => f64,
            "denoise.psf_size" => self.denoise.psf_size => usize,
            "denoise.psf_variance" => self.denoise.psf_variance => f64,
            "denoise.k_min" => self.denoise.k_min => u32,
            "denoise.k_max" => self.denoise.k_max => u32,
            "segment.dog_kernel_len" => self.segment.dog_kernel_len => usize,
            "segment.dog_sigma" => self.segment.dog_sigma => f64,
            "segment.ridge_smooth_len" => self.segment.ridge_smooth_len => usize,
            "segment.ridge_smooth_sigma" => self.segment.ridge_smooth_sigma => f64,
            "segment.ridge_clip_pct" => self.segment.ridge_clip_pct => f64,
            "segment.regiongrow_threshold" => self.segment.regiongrow_threshold => f64,
            "segment.regiongrow_threshold_min" => self.segment.regiongrow_threshold_min => f64,
            "segment.seed_level" => self.segment.seed_level => f64,
            "segment.box_filter_size" => self.segment.box_filter_size => usize,
            "segment.inner_box_px" => self.segment.inner_box_px => usize,
            "segment.gauss_size" => self.segment.gauss_size => usize,
            "segment.gauss_sigma_x" => self.segment.gauss_sigma_x => f64,
            "segment.gauss_sigma_y" => self.segment.gauss_sigma_y => f64,
            "segment.stretch_lo_pct" => self.segment.stretch_lo_pct => f64,
            "segment.stretch_hi_pct" => self.segment.stretch_hi_pct => f64,
            "segment.min_region_px" => self.segment.min_region_px => usize,
            "segment.choroid_pad_px" => self.segment.choroid_pad_px => usize,
            "segment.context_pad_px" => self.segment.context_pad_px => usize,
            "segment.complex_merge_gap_px" => self.segment.complex_merge_gap_px => usize,
            "segment.merge_strength_frac" => self.segment.merge_strength_frac => f64,
            "segment.s4_merge_gap_px" => self.segment.s4_merge_gap_px => usize,
            "segment.s3_merge_gap_px" => self.segment.s3_merge_gap_px => usize,
            "segment.s4_floor_frac" => self.segment.s4_floor_frac => f64,
            "segment.s3_floor_frac" => self.segment.s3_floor_frac => f64,
            "segment.select_guard_px" => self.segment.select_guard_px => usize,
            "segment.inner_guard_px" => self.segment.inner_guard_px => usize,
            "segment.s6_guard_px" => self.segment.s6_guard_px => usize,
            "segment.nfl_guard_px" => self.segment.nfl_guard_px => usize,
            "segment.onl_guard_px" => self.segment.onl_guard_px => usize,
            "segment.refine_radius_px" => self.segment.refine_radius_px => usize,
            "segment.refine_min_grad" => self.segment.refine_min_grad => f64,
            "segment.trace_median_px" => self.segment.trace_median_px => usize,
        );
        Err(OctError::Parse {
            what: "config".into(),
            detail: format!("unknown key `{key}`"),
        })
    }

    /// Apply a config-file body on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| OctError::Parse {
                what: "config".into(),
                detail: format!("line {}: expected `key = value`, got `{line}`", lineno + 1),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                OctError::Parse { what, detail } => OctError::Parse {
                    what,
                    detail: format!("line {}: {detail}", lineno + 1),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Layered resolution: defaults, then the file named by
    /// `OCT_LAYERS_CONFIG` (if set), then an explicit `--config` file, then
    /// individual `key=value` overrides from flags. Later layers win.
    pub fn resolve(
        explicit_file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Ok(env_path) = std::env::var("OCT_LAYERS_CONFIG") {
            if !env_path.is_empty() {
                cfg.apply_file(Path::new(&env_path))?;
            }
        }
        if let Some(path) = explicit_file {
            cfg.apply_file(path)?;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parse a standalone config-file body against the defaults. This is the
/// untrusted-input entry point exercised by the fuzz harness.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    cfg.apply_text(text)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_module_defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.denoiser, Denoiser::FourierWiener);
        assert!((cfg.resolution.lateral_um_per_px - 5.88).abs() < 1e-12);
        assert!((cfg.resolution.axial_um_per_px - 3.87).abs() < 1e-12);
    }

    #[test]
    fn file_grammar_round_trip() {
        let text = "\n# comment\nresolution.axial_um_per_px = 4.0\ndenoiser = wavelet-baseline\nsegment.regiongrow_threshold = 222\nwavelet_levels=4\n";
        let cfg = parse_config(text).unwrap();
        assert!((cfg.resolution.axial_um_per_px - 4.0).abs() < 1e-12);
        assert_eq!(cfg.denoiser, Denoiser::WaveletBaseline);
        assert!((cfg.segment.regiongrow_threshold - 222.0).abs() < 1e-12);
        assert_eq!(cfg.wavelet_levels, 4);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(parse_config("segment.tpyo = 3\n").is_err());
    }

    #[test]
    fn malformed_value_reports_line() {
        let err = parse_config("ok = nope\ndenoise.rel_eps = abc\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key") || msg.contains("line"), "{msg}");
    }

    #[test]
    fn flags_override_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "wavelet_levels = 5\nparallelism = 2\n").unwrap();
        let cfg = PipelineConfig::resolve(
            Some(&path),
            &[("wavelet_levels".into(), "7".into())],
        )
        .unwrap();
        assert_eq!(cfg.wavelet_levels, 7); // flag wins
        assert_eq!(cfg.parallelism, 2); // file still applies
    }

    #[test]
    fn diagnostics_key_reaches_segment_config() {
        let cfg = parse_config("diagnostics = true\n").unwrap();
        assert!(cfg.diagnostics && cfg.segment.keep_diagnostics);
    }

    #[test]
    fn invalid_resolution_is_rejected() {
        assert!(parse_config("resolution.axial_um_per_px = -1\n").is_err());
        assert!(parse_config("resolution.axial_um_per_px = 0\n").is_err());
    }
}
