//! Numerical laboratory for the spectra of Laplacian matrices built from
//! elliptic random matrices.
//!
//! Two independent pipelines and the machinery to compare them:
//!
//! * **Monte Carlo** ([`ensemble`], [`spectra`]): sample mirrored-pair
//!   elliptic matrices, form the row-sum Laplacian `L = X - D` and the
//!   rescaling `M = L / sqrt(n)`, and compute eigenvalues / singular values.
//! * **Limit laws** ([`gaussexp`], [`theory`], [`brown`]): solve the 2x2
//!   block fixed-point equation for the singular-value laws of `M - z`,
//!   invert Stieltjes transforms to densities, and assemble the limiting
//!   eigenvalue measure two ways (log-potential Laplacian, and pushforward
//!   of the `gamma = 0` measure under the subordination map).
//! * **Comparison** ([`compare`], [`acceptance`]): KS / binned-TV metrics
//!   and the singular-value experiments, plus the acceptance suite.

pub mod acceptance;
pub mod brown;
pub mod compare;
pub mod ensemble;
pub mod error;
pub mod gaussexp;
pub mod spectra;
pub mod theory;

pub use error::{Error, Result};

/// Version tag embedded in every output file.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
