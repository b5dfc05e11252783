//! Below-threshold simulation and analysis engine for cavity-assisted
//! photon-pair sources (three-wave and four-wave parametric conversion).
//!
//! The engine computes the spectro-temporal properties of the generated
//! pairs for an arbitrary frequency mismatch between the pump and the sum of
//! the signal/idler resonances, under CW or pulsed pumping, in doubly or
//! triply resonant configurations:
//!
//! * [`biphoton`]: joint spectral/temporal amplitudes (the central objects),
//! * [`cw`]: closed-form CW observables: flux, spectra, correlations,
//! * [`pulsed`]: time-dependent fluxes and non-stationary correlations,
//! * [`pump`]: pump-cavity response for triply resonant operation,
//! * [`langevin`]: independent input-output oracle with absolute rates,
//! * [`fit`]: Lorentzian/double-exponential fits and mismatch estimation,
//! * [`events`]: Monte Carlo coincidence synthesis,
//! * [`fourier`], [`grid`], [`io`]: transforms, sampled containers, disk
//!   formats.
//!
//! All numerics are generic over the scalar type through [`num::Scalar`];
//! the aliases below pin the default double-precision instantiation.
//! Angular frequencies are rad/s everywhere; carriers rotate as
//! `e^{-i omega t}`.

// Negated comparisons are used on purpose in validation and quadrature
// guards: `!(x > 0)` also rejects NaN, which `x <= 0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod cw;
pub mod events;
pub mod fit;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod langevin;
pub mod model;
pub mod num;
pub mod pulsed;
pub mod pump;

/// Default scalar of the concrete engine.
pub type Real = f64;
/// Default complex value.
pub type C64 = num_complex::Complex<f64>;
/// Default-width sampling axis.
pub type RealAxis = grid::Axis<Real>;
/// Default-width real trace.
pub type RealTrace = grid::Trace<Real>;
/// Default-width complex 2-D grid.
pub type ComplexGrid = grid::Grid2<Real, C64>;

/// Engine version string recorded in run manifests.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cw::Arm;
pub use model::{CavityMode, ProcessConfig, ProcessOrder, PumpEnvelope};
