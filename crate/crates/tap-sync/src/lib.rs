//! TAP free energy toolkit for Z2 synchronization.
//!
//! Estimates a sign vector x in {-1,+1}^n from the symmetric observation
//! Y = (lambda/n) x x^T + W by minimizing the TAP free energy
//!
//! ```text
//! F(m) = -(lambda/2n) <m, Y m> - (1/n) sum_i h(m_i) - (lambda^2/4) (1 - |m|^2/n)^2
//! ```
//!
//! over magnetizations m in (-1,1)^n, where h is the binary entropy of
//! (1+m)/2. The crate provides the pieces end to end:
//!
//! - [`model`]: instance sampling for several noise ensembles, plus
//!   serialization of instances to disk.
//! - [`energy`]: the objective, its gradient and Hessian, and the naive
//!   mean-field variant that drops the quadratic correction term.
//! - [`solvers`]: AMP and natural gradient descent from a spectral
//!   initialization, with per-iteration traces.
//! - [`scalars`]: the dimension-free constants (q*, e*, ...) this family
//!   of models concentrates on, from one-dimensional fixed points.
//! - [`diagnostics`]: local stability certificates at a minimizer (Hessian
//!   floor, linearized-update spectrum, Bethe checks).
//! - [`landscape`]: deterministic lower-bound surfaces over the summary
//!   statistics (q, phi) whose argmin locates the minimizer's overlaps.
//! - [`experiments`]: reproducible experiment drivers writing CSV plus
//!   checksum manifests.
//!
//! Each capability has a runnable demo under `examples/`; start with
//! `fixed_point_constants`, then `convergence_curves`. The `tap-sync`
//! binary exposes the same drivers as subcommands.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod landscape;
pub mod math;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod scalars;
pub mod solvers;

pub use error::{Error, Result};
