//! Positive random linear cocycles on R^n ordered by the standard cone:
//! principal Floquet vectors by pullback, top Lyapunov exponents, dual
//! covectors, exponential separation, and the Hilbert-metric contraction
//! machinery that certifies them.
//!
//! The crate is organized bottom-up:
//!
//! * [`ordered`] — the standard cone, partial order, lattice norms;
//! * [`hilbert`] — order ratios m/M, oscillation, projective distance;
//! * [`cocycle`] — seeded two-sided matrix paths, log-scaled products,
//!   the dual cocycle and the model generators;
//! * [`focusing`] — projective diameter, Birkhoff contraction ratio,
//!   focusing constants and primitivity analysis;
//! * [`principal`] — pullback construction of the principal vector,
//!   growth logs, Birkhoff averaging of the top exponent, entire orbits;
//! * [`separation`] — dual principal covector, principal projection,
//!   subadditive second-exponent estimation, temperedness, comparisons;
//! * [`oracle`] — QR re-orthonormalization cross-check for the top
//!   exponents, kept independent of the pullback machinery.
//!
//! Replicate-level Monte Carlo loops run on rayon when the `parallel`
//! feature (default) is enabled and fall back to sequential execution
//! otherwise; numeric results are identical either way.

pub mod cocycle;
pub mod error;
pub mod exec;
pub mod focusing;
pub mod hilbert;
pub mod oracle;
pub mod ordered;
pub mod principal;
pub mod separation;
pub mod stats;

pub use error::{CoreError, Result};
pub use ordered::{ConeVector, NormKind};
