//! Gradient and Newton extremum seeking control on scalar static maps.
//!
//! The crate covers the whole chain from a cost map to a stability
//! certificate:
//!
//! - [`scalar_maps`]: cost maps with analytic derivatives and grid checks of
//!   strict convexity and the global-minimizer assumption.
//! - [`dither`]: the perturbation `S(t)` and demodulation signals `M(t)`, `N(t)`.
//! - [`averaging`]: averaged gradient/Hessian estimates `Ḡ`, `H̄`, their bounds
//!   and the unique averaged equilibrium `θ̄*`.
//! - [`dynamics`]: vector fields for GESC and NESC, full and averaged, in
//!   original and error coordinates.
//! - [`integrator`]: fixed-step RK4 with a positivity guard and decimated
//!   recording.
//! - [`stability`]: the Lyapunov function, its Lie derivative, the `β`
//!   constant, the linearization and practical-stability sweeps.
//! - [`verify`], [`config`], [`commands`]: the property suite and the
//!   file-emitting front ends used by the `esc-lab` binary.
//!
//! ```
//! use esc_lab::{averaging::AveragedMap, quadrature::PeriodicRule, scalar_maps::builtin_map};
//!
//! let map = builtin_map("paper-example").unwrap();
//! let avg = AveragedMap::new(map, 0.5, PeriodicRule::default()).unwrap();
//! // J''(0) = 0, yet the averaged Hessian estimate is strictly positive.
//! assert!(avg.hessian(0.0) > 0.0);
//! let eq = avg.find_equilibrium(1e-12).unwrap();
//! assert!(eq.theta_bar_star > -0.5 && eq.theta_bar_star < 0.5);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod commands;
pub mod config;
pub mod dither;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod output;
pub mod quadrature;
pub mod scalar_maps;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
