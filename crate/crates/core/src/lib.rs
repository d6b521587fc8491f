//! Aperiodic point sets and their diffraction spectra.
//!
//! This crate generates finite samples of lattices, substitution chains and
//! cut-and-project model sets, estimates their autocorrelation by volume
//! averaging over centered balls, and computes Bragg amplitudes as averaged
//! exponential sums. Closed-form spectra (dual-lattice combs, derivative
//! combs, Riesz products, quasiperiodic spectra) are provided alongside the
//! numerical estimators so that each route can be checked against the other.
//!
//! The main entry points are:
//!
//! * [`pointset`] — finite point samples, difference vectors, structure
//!   diagnostics and the stereographic hull metric,
//! * [`generators`] — lattices, crystallographic sets and geometric
//!   substitution chains (Fibonacci, Thue–Morse, period doubling),
//! * [`cps`] — cut-and-project schemes and model sets,
//! * [`autocorr`] — finite-volume autocorrelation estimates with a
//!   convergence ladder over increasing radii,
//! * [`diffraction`] — amplitudes, Bragg scans, closed forms, the Riesz
//!   product and group/uniformity diagnostics,
//! * [`factors`] — locator sets, derived factors and sliding block maps,
//! * [`quasiperiodic`] — Bohr-type trigonometric sums and their spectra,
//! * [`cli`] — the config-driven command line surface.

pub mod autocorr;
pub mod cli;
pub mod cps;
pub mod diffraction;
pub mod error;
pub mod factors;
pub mod generators;
pub mod io;
pub mod numeric;
pub mod pointset;
pub mod quasiperiodic;

pub use error::{Error, Result};
