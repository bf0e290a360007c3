//! Strong Gaussian approximation of partial sums of i.i.d. Hilbert-valued
//! vectors: coupling-rate bounds and truncation dimensions for a given
//! covariance spectrum, exact rate exponents for the standard spectral
//! families, explicit quantile couplings with measured discrepancies, and
//! the lattice construction that certifies lower bounds for every coupling.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod laws;
pub mod lowerbound;
pub mod mc;
pub mod normal;
pub mod simulate;
pub mod spectra;
pub mod stream;

pub use error::{Error, Result};
pub use spectra::{log_star, Family, Spectrum, TailEstimate};
