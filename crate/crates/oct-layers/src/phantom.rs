//! Synthetic B-scan generator with exact ground-truth surfaces.
//!
//! Layers are rendered as piecewise-constant reflectance bands between
//! smooth sinusoidal surfaces, plus a textured choroid, optional intraretinal
//! cysts, an optional foveal pinch, and additive Gaussian noise. The stored
//! ground truth is exact by construction and never altered by noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoise::psf_convolve;
use crate::error::{OctError, Result};
use crate::filter::{convolve_separable, gaussian_psf, gaussian_taps};
use crate::image::{Image, IntensityRange};
use crate::segment::SegmentationResult;
use crate::trace::{SurfaceLabel, SurfaceTrace};

/// Smooth per-column curve `base + amp * sin(2 pi cycles x / width + phase)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SineParam {
    pub base: f64,
    pub amp: f64,
    pub cycles: f64,
    pub phase: f64,
}

impl SineParam {
    pub fn flat(base: f64) -> Self {
        SineParam {
            base,
            amp: 0.0,
            cycles: 0.0,
            phase: 0.0,
        }
    }

    pub fn at(&self, col: usize, width: usize) -> f64 {
        self.base
            + self.amp
                * (2.0 * std::f64::consts::PI * self.cycles * col as f64 / width as f64
                    + self.phase)
                    .sin()
    }
}

/// Mean reflectance of each band, in `[0, 1]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LayerIntensities {
    pub vitreous: f64,
    pub nfl: f64,
    pub ipl_gcl: f64,
    pub inl: f64,
    pub onl: f64,
    pub is_os: f64,
    /// Hypo-reflective seam at the bottom of the IS/OS band, mirroring the
    /// dark gap between the photoreceptor line and the RPE in real scans.
    pub isos_gap: f64,
    pub rpe: f64,
    pub choroid: f64,
    pub sclera: f64,
}

impl Default for LayerIntensities {
    fn default() -> Self {
        LayerIntensities {
            vitreous: 0.12,
            nfl: 0.58,
            ipl_gcl: 0.24,
            inl: 0.34,
            onl: 0.46,
            is_os: 0.66,
            isos_gap: 0.32,
            rpe: 0.54,
            choroid: 0.40,
            sclera: 0.12,
        }
    }
}

impl LayerIntensities {
    fn all(&self) -> [f64; 10] {
        [
            self.vitreous,
            self.nfl,
            self.ipl_gcl,
            self.inl,
            self.onl,
            self.is_os,
            self.isos_gap,
            self.rpe,
            self.choroid,
            self.sclera,
        ]
    }

    fn band(&self, index: usize) -> f64 {
        [
            self.vitreous,
            self.nfl,
            self.ipl_gcl,
            self.inl,
            self.onl,
            self.is_os,
            self.rpe,
            self.choroid,
            self.sclera,
        ][index]
    }
}

/// Dark fluid-filled ellipse confined to the inner retina (between S2 and S5).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Cyst {
    /// Center column as a fraction of the image width.
    pub center_col_frac: f64,
    /// Vertical center as a fraction of the local S2..S5 band.
    pub center_band_frac: f64,
    /// Semi-axes in pixels (columns, rows).
    pub semi_axis_col: f64,
    pub semi_axis_row: f64,
    pub intensity: f64,
}

/// Foveal depression: S1 dips and the inner layers pinch toward S5.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FovealPinch {
    pub center_frac: f64,
    pub sigma_px: f64,
    /// Downward S1 displacement at the center, pixels.
    pub s1_dip_px: f64,
    /// Fraction of inner-layer thickness removed at the center, in `[0, 1)`.
    pub strength: f64,
    /// Thickness floor for pinched layers, pixels.
    pub min_thickness_px: f64,
}

/// Optical blur applied to the rendered scene before noise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsfBlur {
    pub size: usize,
    pub variance: f64,
}

/// Full description of a synthetic B-scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub s1: SineParam,
    /// Per-layer thickness curves: NFL, IPL/GCL, INL, ONL, IS/OS, RPE.
    pub thickness: [SineParam; 6],
    pub choroid_thickness_px: f64,
    /// Depth of the hypo-reflective seam at the bottom of the IS/OS band.
    pub isos_gap_px: f64,
    /// Depth over which the choroid fades to the sclera level at its bottom,
    /// so the scene is flat well before the background region starts.
    pub choroid_fade_px: f64,
    pub intensities: LayerIntensities,
    /// Peak amplitude of the band-limited choroid texture.
    pub texture_amp: f64,
    pub cysts: Vec<Cyst>,
    pub foveal: Option<FovealPinch>,
    /// System PSF; the observed image is the blurred scene plus noise.
    pub psf_blur: Option<PsfBlur>,
    pub noise_sigma: f64,
    /// Speckle grain: Gaussian correlation length of the additive noise in
    /// pixels; 0 gives white noise.
    pub speckle_grain_sigma: f64,
    pub seed: u64,
}

const SURFACE_MIN_SEP: f64 = 2.0;

/// Named preset used by the acceptance suite.
pub fn preset(name: &str, width: usize, height: usize) -> Result<PhantomSpec> {
    let base = PhantomSpec {
        width,
        height,
        s1: SineParam {
            base: 0.32 * height as f64,
            amp: 6.0,
            cycles: 1.5,
            phase: 0.4,
        },
        thickness: [
            SineParam {
                base: 13.0,
                amp: 4.0,
                cycles: 2.0,
                phase: 1.1,
            }, // NFL
            SineParam {
                base: 17.0,
                amp: 4.0,
                cycles: 1.0,
                phase: 2.3,
            }, // IPL/GCL
            SineParam {
                base: 17.0,
                amp: 3.0,
                cycles: 1.7,
                phase: 4.0,
            }, // INL
            SineParam {
                base: 21.0,
                amp: 4.0,
                cycles: 1.3,
                phase: 5.5,
            }, // ONL
            SineParam {
                base: 22.0,
                amp: 2.5,
                cycles: 0.8,
                phase: 0.9,
            }, // IS/OS
            SineParam {
                base: 14.0,
                amp: 4.5,
                cycles: 1.2,
                phase: 3.3,
            }, // RPE
        ],
        choroid_thickness_px: 50.0,
        isos_gap_px: 10.0,
        choroid_fade_px: 12.0,
        intensities: LayerIntensities::default(),
        texture_amp: 0.05,
        cysts: Vec::new(),
        foveal: None,
        psf_blur: Some(PsfBlur {
            size: 17,
            variance: 6.25,
        }),
        noise_sigma: 0.05,
        speckle_grain_sigma: 0.7,
        seed: 7,
    };
    match name {
        "normal" => Ok(base),
        "foveal" => Ok(PhantomSpec {
            foveal: Some(FovealPinch {
                center_frac: 0.5,
                sigma_px: 30.0,
                s1_dip_px: 18.0,
                strength: 0.9,
                min_thickness_px: 2.1,
            }),
            ..base
        }),
        "cystic" => Ok(PhantomSpec {
            cysts: vec![
                Cyst {
                    center_col_frac: 0.30,
                    center_band_frac: 0.80,
                    semi_axis_col: 25.0,
                    semi_axis_row: 5.0,
                    intensity: 0.22,
                },
                Cyst {
                    center_col_frac: 0.44,
                    center_band_frac: 0.80,
                    semi_axis_col: 22.0,
                    semi_axis_row: 4.5,
                    intensity: 0.22,
                },
            ],
            ..base
        }),
        other => Err(OctError::UnknownPreset(other.to_string())),
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedPhantom {
    pub noisy: Image,
    pub clean: Image,
    pub truth: SegmentationResult,
}

const SURFACE_NAMES: [&str; 8] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "choroid"];

/// Real-valued surface rows, S1..S7 plus the choroid lower boundary, one
/// entry per column.
fn build_surfaces(spec: &PhantomSpec) -> Result<Vec<Vec<f64>>> {
    let w = spec.width;
    let mut surfaces = vec![vec![0.0f64; w]; 8];
    for c in 0..w {
        let pinch = spec.foveal.map(|f| {
            let d = c as f64 - f.center_frac * w as f64;
            (f, (-d * d / (2.0 * f.sigma_px * f.sigma_px)).exp())
        });
        let mut row = spec.s1.at(c, w);
        if let Some((f, g)) = pinch {
            row += f.s1_dip_px * g;
        }
        surfaces[0][c] = row;
        for (i, t) in spec.thickness.iter().enumerate() {
            let mut th = t.at(c, w).max(SURFACE_MIN_SEP);
            if let Some((f, g)) = pinch {
                // pinch only the inner layers (NFL, IPL/GCL, INL, ONL)
                if i < 4 {
                    th = (th * (1.0 - f.strength * g)).max(f.min_thickness_px);
                }
            }
            row += th;
            surfaces[i + 1][c] = row;
        }
        surfaces[7][c] = row + spec.choroid_thickness_px.max(SURFACE_MIN_SEP);
    }
    // validate ordering, separation and bounds
    for c in 0..w {
        if surfaces[0][c] < SURFACE_MIN_SEP {
            return Err(OctError::PhantomOrdering("top".into(), "S1".into()));
        }
        for i in 0..7 {
            if surfaces[i + 1][c] - surfaces[i][c] < SURFACE_MIN_SEP - 1e-9 {
                return Err(OctError::PhantomOrdering(
                    SURFACE_NAMES[i].into(),
                    SURFACE_NAMES[i + 1].into(),
                ));
            }
        }
        if surfaces[7][c] > (spec.height as f64) - SURFACE_MIN_SEP {
            return Err(OctError::PhantomOrdering(
                "choroid".into(),
                "bottom".into(),
            ));
        }
    }
    Ok(surfaces)
}

/// Band-limited zero-mean texture field, peak-normalized to `amp`.
fn texture_field(width: usize, height: usize, seed: u64, amp: f64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7465_7874);
    let data: Vec<f64> = (0..width * height)
        .map(|_| rng.gen::<f64>() - 0.5)
        .collect();
    let white = Image::assemble(width, height, IntensityRange::Unit, data);
    let taps = gaussian_taps(9, 2.0);
    let smooth = convolve_separable(&white, &taps, &taps);
    let peak = smooth
        .pixels()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::EPSILON);
    smooth.map(IntensityRange::Unit, |v| v / peak * amp)
}

/// Deterministic standard-normal sampler (Box-Muller).
struct NormalSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    fn new(seed: u64) -> Self {
        NormalSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn sample(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1: f64 = loop {
            let u = self.rng.gen::<f64>();
            if u > f64::MIN_POSITIVE {
                break u;
            }
        };
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Render the phantom. Deterministic for a fixed spec.
pub fn generate(spec: &PhantomSpec) -> Result<GeneratedPhantom> {
    if spec.noise_sigma < 0.0 {
        return Err(OctError::InvalidConfig("noise_sigma must be >= 0".into()));
    }
    for (i, v) in spec.intensities.all().into_iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(OctError::InvalidConfig(format!(
                "layer intensity {i} out of [0,1]"
            )));
        }
    }
    let surfaces = build_surfaces(spec)?;
    let (w, h) = (spec.width, spec.height);
    // integer boundaries: surface k is the first row of the band below it
    let bounds: Vec<Vec<usize>> = surfaces
        .iter()
        .map(|s| s.iter().map(|&v| v.round().max(0.0) as usize).collect())
        .collect();

    let texture = texture_field(w, h, spec.seed, spec.texture_amp);
    let mut clean = Image::zeros(w, h, IntensityRange::Unit)?;
    for c in 0..w {
        for r in 0..h {
            // band index = number of boundaries at or above this row
            let mut band = 0usize;
            while band < 8 && r >= bounds[band][c] {
                band += 1;
            }
            let mut v = spec.intensities.band(band);
            if band == 5 && spec.isos_gap_px > 0.0 {
                // dark seam just above S6
                if surfaces[5][c] - r as f64 <= spec.isos_gap_px {
                    v = spec.intensities.isos_gap;
                }
            }
            if band == 7 {
                // choroid texture
                v = (v + texture.get(r, c)).clamp(0.0, 1.0);
                let fade = spec.choroid_fade_px.max(0.0);
                let depth_left = surfaces[7][c] - r as f64;
                if fade > 0.0 && depth_left < fade {
                    let t = 1.0 - (depth_left / fade).clamp(0.0, 1.0);
                    v += t * (spec.intensities.sclera - v);
                }
            }
            clean.set(r, c, v);
        }
    }
    // cysts, clipped to the open band between S2 and S5
    for cyst in &spec.cysts {
        let cx = cyst.center_col_frac * w as f64;
        let col0 = ((cx - cyst.semi_axis_col).floor().max(0.0)) as usize;
        let col1 = ((cx + cyst.semi_axis_col).ceil() as usize).min(w - 1);
        for c in col0..=col1 {
            let s2 = surfaces[1][c];
            let s5 = surfaces[4][c];
            let cy = s2 + cyst.center_band_frac * (s5 - s2);
            let r0 = ((cy - cyst.semi_axis_row).floor().max(0.0)) as usize;
            let r1 = ((cy + cyst.semi_axis_row).ceil() as usize).min(h - 1);
            for r in r0..=r1 {
                let dx = (c as f64 - cx) / cyst.semi_axis_col;
                let dy = (r as f64 - cy) / cyst.semi_axis_row;
                let rf = r as f64;
                if dx * dx + dy * dy <= 1.0 && rf > s2 + 1.0 && rf < s5 - 1.0 {
                    clean.set(r, c, cyst.intensity);
                }
            }
        }
    }

    if let Some(blur) = spec.psf_blur {
        let kernel = gaussian_psf(blur.size, blur.variance)?;
        clean = psf_convolve(&clean, &kernel);
        clean.clamp_to_range();
    }

    let mut noisy = clean.clone();
    if spec.noise_sigma > 0.0 {
        let mut sampler = NormalSampler::new(spec.seed);
        let mut field: Vec<f64> = (0..w * h).map(|_| sampler.sample()).collect();
        if spec.speckle_grain_sigma > 0.0 {
            // correlate the grain, then restore unit marginal sd
            let reach = (3.0 * spec.speckle_grain_sigma).ceil() as usize;
            let taps = gaussian_taps(2 * reach + 1, spec.speckle_grain_sigma);
            let white = Image::assemble(w, h, IntensityRange::Unit, field);
            let smooth = convolve_separable(&white, &taps, &taps);
            let axis_var: f64 = taps.iter().map(|t| t * t).sum();
            field = smooth.pixels().iter().map(|&v| v / axis_var).collect();
        }
        for (v, n) in noisy.pixels_mut().iter_mut().zip(&field) {
            *v = (*v + spec.noise_sigma * n).clamp(0.0, 1.0);
        }
    }

    let truth = SegmentationResult::new(
        SurfaceLabel::ALL
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                SurfaceTrace::new(label, bounds[i].iter().map(|&r| Some(r)).collect())
            })
            .collect(),
    );
    Ok(GeneratedPhantom {
        noisy,
        clean,
        truth,
    })
}
