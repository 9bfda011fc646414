//! Stochastic dynamics on chart-atlas Riemannian manifolds.
//!
//! The crate simulates two families of degenerate diffusions — second-order
//! Langevin dynamics on the tangent bundle and unit-speed fibre lay-down
//! dynamics on the unit tangent bundle — over manifolds given as finite
//! chart atlases, and provides the numerical machinery to check the
//! geometric operator identities behind their exponential ergodicity:
//! semispray/lift calculus, invariant bundle measures with exact sampling
//! and quadrature, generator and projection identities, coercivity
//! constants, decay-rate fitting, and time-average error bounds.
//!
//! Modules mirror that split:
//!
//! * [`geometry`] — atlases, metrics, Christoffels, geodesics, transport;
//! * [`bundle`] — double-tangent calculus: lifts, connector, Sasaki metric,
//!   spherical operators on the unit bundle;
//! * [`dynamics`] — stochastic integrators and ensemble execution;
//! * [`measures`] — the invariant measure: density, sampling, fibre
//!   averages, quadrature;
//! * [`analysis`] — operator-identity checks, coercivity constants, decay
//!   estimation and rate fitting;
//! * [`stats`] — small statistical helpers (batch means, chi-square,
//!   weighted least squares).
//!
//! Ensemble execution is data-parallel via rayon when the default
//! `parallel` feature is enabled; disabling it yields a sequential build
//! with identical results.

pub mod analysis;
pub mod bundle;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod par;
pub mod stats;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
