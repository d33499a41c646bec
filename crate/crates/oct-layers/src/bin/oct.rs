//! `oct` — batch CLI for OCT B-scan denoising, segmentation and metrics.
//!
//! Configuration is layered: built-in defaults, then the file named by the
//! `OCT_LAYERS_CONFIG` environment variable, then `--config FILE`, then
//! individual `--set key=value` flags. Later layers win.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oct_layers::config::{Denoiser, PipelineConfig};
use oct_layers::io::{self, EstReport, SCHEMA_VERSION};
use oct_layers::metrics::Layer;
use oct_layers::phantom;
use oct_layers::pipeline;
use oct_layers::{OctError, Result, SurfaceLabel};

#[derive(Parser)]
#[command(
    name = "oct",
    version,
    about = "Denoise, segment and measure retinal OCT B-scans"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (key = value per line); overrides OCT_LAYERS_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single override, e.g. --set segment.refine_radius_px=7 (repeatable;
    /// wins over config files).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let overrides = self
            .sets
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| OctError::Parse {
                        what: "flag".into(),
                        detail: format!("--set expects key=value, got `{kv}`"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        PipelineConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Denoise one image, writing the result and the noise-estimate report.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Noise-estimation audit JSON (blind Wiener only).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Segment a denoised image into the seven surfaces plus choroid.
    Segment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-iteration diagnostic images.
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Per-column layer thickness from a surfaces CSV.
    Thickness {
        #[arg(long)]
        surfaces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one layer (e.g. NFL, Inner); default is all nine.
        #[arg(long)]
        layer: Option<String>,
    },
    /// Image-quality and thickness metrics, optionally against a reference.
    Metrics {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        surfaces: PathBuf,
        /// Reference (manual) surfaces CSV.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic B-scan with exact ground-truth surfaces.
    Phantom {
        /// normal | cystic | foveal
        #[arg(long, default_value = "normal")]
        preset: String,
        /// WIDTHxHEIGHT in pixels.
        #[arg(long, default_value = "1024x496")]
        size: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth surfaces CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Noise-free scene image.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
    /// Batch pipeline: denoise, segment and measure every input image.
    Run {
        /// Output directory for per-image and stack artifacts.
        #[arg(long)]
        out_dir: PathBuf,
        /// Input images (PNG or PGM).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Run two configurations over the same inputs and report side by side.
    Compare {
        /// Config file for side A (defaults apply when omitted).
        #[arg(long)]
        config_a: Option<PathBuf>,
        /// Config file for side B.
        #[arg(long)]
        config_b: Option<PathBuf>,
        /// Override for side A, key=value (repeatable).
        #[arg(long = "set-a", value_name = "KEY=VALUE")]
        sets_a: Vec<String>,
        /// Override for side B, key=value (repeatable).
        #[arg(long = "set-b", value_name = "KEY=VALUE")]
        sets_b: Vec<String>,
        /// Truth surfaces CSV, one per input in order (repeatable).
        #[arg(long)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let err = || OctError::Parse {
        what: "flag".into(),
        detail: format!("--size expects WIDTHxHEIGHT, got `{s}`"),
    };
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(err)?;
    Ok((
        w.trim().parse().map_err(|_| err())?,
        h.trim().parse().map_err(|_| err())?,
    ))
}

fn side_config(file: Option<&PathBuf>, sets: &[String]) -> Result<PipelineConfig> {
    ConfigArgs {
        config: file.cloned(),
        sets: sets.to_vec(),
    }
    .resolve()
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.config.resolve()?;
    match cli.command {
        Command::Denoise { input, out, report } => {
            let img = io::read_image(&input)?;
            let (denoised, estimate) = match cfg.denoiser {
                Denoiser::FourierWiener => {
                    let (d, e) = oct_layers::denoise::denoise(&img, &cfg.denoise)?;
                    (d, Some(e))
                }
                Denoiser::WaveletBaseline => (
                    oct_layers::denoise::wavelet_denoise_baseline(&img, cfg.wavelet_levels),
                    None,
                ),
                Denoiser::None => (img.clone(), None),
            };
            io::write_png(&out, &denoised)?;
            match (report, estimate) {
                (Some(path), Some(est)) => io::write_json(
                    &path,
                    &EstReport {
                        schema_version: SCHEMA_VERSION,
                        k: est.k,
                        a: est.a,
                        nsr: est.nsr,
                        error_surface: est.error_surface,
                        k_min: est.k_min,
                    },
                )?,
                (Some(_), None) => {
                    eprintln!(
                        "oct: --report ignored: denoiser `{}` has no noise estimate",
                        cfg.denoiser.name()
                    );
                }
                _ => {}
            }
        }
        Command::Segment { input, out, diag } => {
            let img = io::read_image(&input)?;
            let mut seg_cfg = cfg.segment.clone();
            if diag.is_some() {
                seg_cfg.keep_diagnostics = true;
            }
            let result = oct_layers::segment::segment(&img, &seg_cfg)?;
            io::write_surfaces_csv(&out, result.surfaces())?;
            if let Some(dir) = diag {
                std::fs::create_dir_all(&dir)?;
                for it in &result.per_iteration {
                    if let Some(f) = &it.filtered {
                        io::write_png(&dir.join(format!("iter{}.filtered.png", it.index)), f)?;
                    }
                    if let Some(b) = &it.binary {
                        let img = oct_layers::Image::new(
                            b.width(),
                            b.height(),
                            oct_layers::IntensityRange::Unit,
                            b.bits().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
                        )?;
                        io::write_png(&dir.join(format!("iter{}.binary.png", it.index)), &img)?;
                    }
                }
            }
        }
        Command::Thickness {
            surfaces,
            out,
            layer,
        } => {
            let traces = io::read_surfaces_csv(&surfaces)?;
            let selected: Vec<Layer> = match layer {
                Some(name) => vec![Layer::parse(&name).ok_or_else(|| OctError::Parse {
                    what: "flag".into(),
                    detail: format!("unknown layer `{name}`"),
                })?],
                None => Layer::ALL.to_vec(),
            };
            let mut csv = String::from("column,layer,thickness_um\n");
            for layer in selected {
                let (upper, lower) = layer.bounds();
                let find = |l: SurfaceLabel| traces.iter().find(|t| t.label == l);
                let (Some(a), Some(b)) = (find(upper), find(lower)) else {
                    continue;
                };
                let profile = oct_layers::metrics::thickness(a, b, &cfg.resolution)?;
                for (col, um) in profile.per_column_um.iter().enumerate() {
                    if let Some(um) = um {
                        csv.push_str(&format!("{col},{},{um:.3}\n", profile.label));
                    }
                }
            }
            io::atomic_write(&out, csv.as_bytes())?;
        }
        Command::Metrics {
            image,
            surfaces,
            reference,
            out,
        } => {
            let img = io::read_image(&image)?;
            let traces = io::read_surfaces_csv(&surfaces)?;
            let reference = reference
                .map(|p| io::read_surfaces_csv(&p))
                .transpose()?;
            let report = oct_layers::pipeline::metrics_report(
                &img,
                &traces,
                reference.as_deref(),
                &cfg,
            )?;
            io::write_json(&out, &report)?;
        }
        Command::Phantom {
            preset,
            size,
            seed,
            out,
            truth,
            clean,
        } => {
            let (w, h) = parse_size(&size)?;
            let mut spec = phantom::preset(&preset, w, h)?;
            spec.seed = seed;
            let generated = phantom::generate(&spec)?;
            io::write_png(&out, &generated.noisy)?;
            if let Some(path) = truth {
                io::write_surfaces_csv(&path, generated.truth.surfaces())?;
            }
            if let Some(path) = clean {
                io::write_png(&path, &generated.clean)?;
            }
        }
        Command::Run { out_dir, inputs } => {
            let summary = pipeline::run_pipeline(&inputs, &out_dir, &cfg)?;
            for outcome in &summary.outcomes {
                match &outcome.error {
                    None => println!("ok   {}", outcome.input.display()),
                    Some(e) => println!("FAIL {}: {e}", outcome.input.display()),
                }
            }
            println!(
                "{} of {} image(s) succeeded",
                summary.outcomes.len() - summary.failed,
                summary.outcomes.len()
            );
            return Ok(summary.all_ok());
        }
        Command::Compare {
            config_a,
            config_b,
            sets_a,
            sets_b,
            truth,
            out,
            inputs,
        } => {
            if !truth.is_empty() && truth.len() != inputs.len() {
                return Err(OctError::Parse {
                    what: "flag".into(),
                    detail: format!(
                        "--truth given {} time(s) for {} input(s); supply one per input or none",
                        truth.len(),
                        inputs.len()
                    ),
                });
            }
            let cfg_a = side_config(config_a.as_ref(), &sets_a)?;
            let cfg_b = side_config(config_b.as_ref(), &sets_b)?;
            let pairs: Vec<(PathBuf, Option<PathBuf>)> = inputs
                .into_iter()
                .enumerate()
                .map(|(i, input)| (input, truth.get(i).cloned()))
                .collect();
            let report = pipeline::compare(&pairs, &cfg_a, &cfg_b)?;
            io::write_json(&out, &report)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("oct: {e}");
            ExitCode::FAILURE
        }
    }
}
