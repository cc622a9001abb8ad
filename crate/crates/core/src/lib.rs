//! Simulation and verification toolkit for the damped stochastic Burgers equation
//!
//! ```text
//! du = (u_xx - k u - ½ ∂x(u²)) dt + σ(u) dW,   W(t) = Σ_j a_j β_j(t) e_j
//! ```
//!
//! posed on the real line and approximated on a truncated interval `[-L, L]`
//! with homogeneous Dirichlet boundary values. The linear part is diagonal in
//! the sine basis of that interval, so the heat semigroup, the noise modes and
//! the Laplacian all share one fast transform.
//!
//! Layout:
//! - [`grid`]: mesh, fields, norms, tail functionals and the cutoff function.
//! - [`heat`]: heat semigroup and the deterministic/stochastic convolutions.
//! - [`noise`]: spectral Wiener increments, noise coefficients, random streams.
//! - [`integrator`]: exponential Euler–Maruyama time stepping.
//! - [`picard`]: truncated fixed-point map and contraction measurements.
//! - [`diagnostics`]: ensembles, bound reports, Feller probe, Cole–Hopf oracle.
//! - [`ergodic`]: time-averaged empirical measures and tightness.
//! - [`io`]: configuration text, manifests, CSV and binary snapshot formats.

// NaN must fail parameter checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod ergodic;
mod error;
pub mod grid;
pub mod heat;
pub mod integrator;
pub mod io;
pub mod noise;
pub mod picard;
mod transform;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use heat::HeatOperator;
pub use integrator::{SimConfig, Trajectory};
pub use noise::{NoiseModel, NoiseStream, SigmaKind, SigmaSpec};
