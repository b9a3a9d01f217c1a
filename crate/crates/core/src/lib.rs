//! Pseudospectral laboratory for the nonlocal nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + s u(t,x)^2 conj(u(t,-x)) = 0,   s = +1 (focusing) or -1 (defocusing)
//! ```
//!
//! on a periodic truncation of the real line. The crate provides closed-form
//! solutions ([`analytic`]), the nonlocal nonlinearity ([`nonlinearity`]),
//! conserved quantities ([`invariants`]), split-step and integrating-factor
//! time stepping with blow-up detection ([`integrator`]), and experiment
//! runners that check finite-time blow-up and soliton instability
//! quantitatively ([`experiments`]).

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod integrator;
pub mod invariants;
pub mod nonlinearity;
pub mod output;
pub mod verification;

pub use error::{AnalyticError, ConfigError, ExperimentError, GridError, IntegratorError, OutputError};
pub use grid::{Grid, SpectralField};
pub use num_complex::Complex64;
