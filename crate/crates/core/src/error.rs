//! Error type shared across the crate.

use std::fmt;
use std::io;

/// All failure modes surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// A resolution is not divisible by the required scale/grid factor.
    IndivisibleResolution { resolution: u32, divisor: u32 },
    /// Preference weight lambda lies outside [0, 1].
    WeightOutOfRange { lambda: f64 },
    /// No configuration on the candidate grid satisfies the latency budget
    /// and residual capacity.
    NoFeasibleConfiguration { request_id: String },
    /// Curve fitting was given too few samples or no resolution spread.
    DegenerateSamples { reason: String },
    /// A structured input file could not be parsed.
    Parse { path: String, message: String },
    /// An input file does not exist or could not be read.
    FileNotFound { path: String, source: io::Error },
    /// Two images (or an image and a mask) disagree in shape.
    DimensionMismatch { expected: String, actual: String },
    /// Patch overlap is too large for the patch geometry.
    OverlapTooLarge { overlap: u32, patch_side: u32 },
    /// A canvas pixel is covered by zero total stitch weight.
    UncoveredPixel { x: u32, y: u32 },
    /// A placement rectangle does not fit in the stitch canvas.
    PlacementOutOfBounds { x: u32, y: u32, w: u32, h: u32 },
    /// Generic I/O failure while writing an artifact.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IndivisibleResolution { resolution, divisor } => {
                write!(f, "resolution {resolution} is not divisible by {divisor}")
            }
            Error::WeightOutOfRange { lambda } => {
                write!(f, "preference weight {lambda} is outside [0, 1]")
            }
            Error::NoFeasibleConfiguration { request_id } => {
                write!(f, "no feasible configuration for request {request_id}")
            }
            Error::DegenerateSamples { reason } => {
                write!(f, "degenerate fit samples: {reason}")
            }
            Error::Parse { path, message } => write!(f, "cannot parse {path}: {message}"),
            Error::FileNotFound { path, source } => write!(f, "cannot read {path}: {source}"),
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            Error::OverlapTooLarge { overlap, patch_side } => {
                write!(f, "overlap {overlap} too large for patch side {patch_side}")
            }
            Error::UncoveredPixel { x, y } => {
                write!(f, "canvas pixel ({x}, {y}) has zero total stitch weight")
            }
            Error::PlacementOutOfBounds { x, y, w, h } => {
                write!(f, "placement {w}x{h} at ({x}, {y}) exceeds the canvas")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::FileNotFound { source, .. } => Some(source),
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
