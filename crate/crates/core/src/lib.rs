//! Fractional Laplace–Beltrami operators (−Δ_g)^s on the flat torus and the
//! round sphere, evaluated and cross-checked along independent routes:
//!
//! * [`spectral`]: exact eigen-expansion calculus (ground truth), resolvent
//!   and the imaginary-axis contour formula;
//! * [`heat`]: exact heat kernels, their short-time parametrix, the Li–Yau
//!   Gaussian bound and the heat-semigroup integral for (−Δ_g)^s;
//! * [`pvkernel`]: the principal-value singular integral with kernel
//!   `(c_{n,s} χ u₀ + k)/d^{n+2s}` and its negative-order (Riesz) counterpart;
//! * [`parametrix`]: Bessel potentials, the transport equation for u₀ and the
//!   Hadamard resolvent parametrix;
//! * [`inequalities`]: numerical checks of the fractional Sobolev embedding and
//!   pointwise commutator-type inequalities.
//!
//! [`experiment`] and [`checks`] turn all of this into reproducible CSV runs.

pub mod checks;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod heat;
pub mod pvkernel;
pub mod inequalities;
pub mod parametrix;
pub mod quad;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{Field, Grid, Manifold, Mode, Point, SpectralBasis, SpectralCoeffs};
pub use num_complex::Complex64;
