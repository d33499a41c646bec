use thiserror::Error;

/// Errors produced by the processing pipeline.
#[derive(Debug, Error)]
pub enum OctError {
    #[error("image dimensions {0}x{1} below minimum 8x8")]
    ImageTooSmall(usize, usize),

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("degenerate spectrum: no nonzero frequency bins")]
    DegenerateSpectrum,

    #[error("singular deconvolution: zero-magnitude PSF bin with nsr = 0")]
    SingularDeconvolution,

    #[error("PSF kernel size must be odd and >= 3, got {0}")]
    BadKernelSize(usize),

    #[error("empty region of interest for iteration {0}")]
    EmptyRegionOfInterest(usize),

    #[error("degenerate histogram: masked region has a single pixel value")]
    DegenerateHistogram,

    #[error("no candidate region at iteration {0}")]
    NoCandidateRegion(usize),

    #[error("no seed pixel at maximum value for region growing")]
    NoSeedPixel,

    #[error("noise-free background: sigma_b = 0")]
    NoiseFreeBackground,

    #[error("degenerate contrast: both regions constant and equal")]
    DegenerateContrast,

    #[error("infinite PSNR: images are identical")]
    InfinitePsnr,

    #[error("no overlap between surface traces")]
    NoOverlap,

    #[error("undefined correlation: reference has zero variance")]
    UndefinedCorrelation,

    #[error("need at least {0} common columns, found {1}")]
    TooFewColumns(usize, usize),

    #[error("phantom surfaces {0} and {1} violate ordering/separation")]
    PhantomOrdering(String, String),

    #[error("unknown phantom preset '{0}'")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OctError>;
