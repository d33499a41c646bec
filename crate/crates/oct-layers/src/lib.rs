//! Denoising, segmentation and evaluation of retinal OCT B-scans.
//!
//! The pipeline has three stages:
//!
//! 1. [`denoise`] -- Wiener deconvolution with blind estimation of the
//!    additive-noise variance from a Fourier-domain structural error, plus a
//!    wavelet soft-threshold baseline for comparison.
//! 2. [`segment`] -- iterative multi-resolution extraction of the 7
//!    sub-retinal surfaces (S1..S7) and the choroid bound.
//! 3. [`metrics`] -- SNR/CNR/PSNR image quality, per-surface error and
//!    per-layer thickness statistics in micrometers.
//!
//! [`phantom`] generates synthetic B-scans with exact ground-truth surfaces
//! for validation, and [`pipeline`] wires everything behind the `oct` CLI.

pub mod config;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod filter;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod segment;
pub mod trace;

pub use error::{OctError, Result};
pub use image::{Image, IntensityRange, Mask, Resolution};
pub use trace::{SurfaceLabel, SurfaceTrace};
