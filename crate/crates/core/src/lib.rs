//! Spectrality of self-similar measures `mu_{1/p, D}` with product-form digit
//! sets `D = {0..N-1} ⊕ m {0..L-1}`, explicit spectra, and the matching
//! tiling checks for the attractor `T(1/p, D)`.

pub mod arith;
pub mod cli;
pub mod decision;
pub mod digits;
pub mod error;
pub mod exec;
pub mod fourier;
pub mod spectrum;
pub mod tiling;

pub use arith::Rational;
pub use decision::{decide, DValue, Decomposition, SpectralCertificate};
pub use digits::{GenericDigitSet, ProductDigitSet, ScaledLatticeUnion};
pub use error::{Error, Result};
pub use exec::Exec;
pub use spectrum::{build_spectrum, BuildOptions, FreqDigits, SpectrumCandidate};
