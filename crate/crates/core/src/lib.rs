//! Parallel-beam tomography laboratory for studying how well a backprojector
//! matches its forward projector.
//!
//! Six discrete Radon transforms are provided (pixel-, ray- and
//! distance-driven, slant stacking, and two Fourier gridding variants), each
//! with an exactly transposed adjoint. On top of them sit the inner-product
//! coupling audit, filtered backprojection, four iterative solvers that accept
//! any forward/adjoint pairing, the Shepp-Logan phantom with its analytic
//! sinogram, image metrics and a Poisson noise model, and the experiment
//! runner that drives whole reconstruction matrices.

pub mod coupling;
pub mod experiments;
pub mod fbp;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod phantom;
pub mod projectors;
pub mod solvers;

pub use grid::{is_undersampled, reconstruction_circle_mask, Geometry, ImageGrid, SeededRng, Sinogram};
pub use projectors::{ProjectorKind, ProjectorPair};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite samples in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dense assembly of {0} entries exceeds the 2^26 limit")]
    TooLarge(usize),
    #[error("zero denominator in inner-product ratio")]
    ZeroDenominator,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
